// Deliberate defects for mutation-testing the self-test battery.
// Never active unless a caller sets one.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace brwre {

enum class Fault {
    none,
    q2_coefficient,      // scales the H_5 coefficient of the closed-form Q_2
    hermite_recurrence,  // perturbs the three-term recurrence at degree 4
};

void set_fault(Fault f) noexcept;
Fault active_fault() noexcept;

std::optional<Fault> parse_fault(std::string_view name);
std::string_view fault_name(Fault f) noexcept;
std::vector<std::string> fault_names();

/// Sets a fault for the lifetime of the guard.
class FaultGuard {
public:
    explicit FaultGuard(Fault f) noexcept : previous_(active_fault()) { set_fault(f); }
    ~FaultGuard() { set_fault(previous_); }
    FaultGuard(const FaultGuard&) = delete;
    FaultGuard& operator=(const FaultGuard&) = delete;

private:
    Fault previous_;
};

}  // namespace brwre
