#include "brwre/fault_injection.hpp"

#include <atomic>

namespace brwre {

namespace {
std::atomic<Fault> g_fault{Fault::none};

constexpr std::pair<Fault, std::string_view> kNames[] = {
    {Fault::none, "none"},
    {Fault::q2_coefficient, "q2"},
    {Fault::hermite_recurrence, "hermite"},
};
}  // namespace

void set_fault(Fault f) noexcept { g_fault.store(f, std::memory_order_relaxed); }
Fault active_fault() noexcept { return g_fault.load(std::memory_order_relaxed); }

std::optional<Fault> parse_fault(std::string_view name) {
    for (const auto& [f, n] : kNames) {
        if (n == name) return f;
    }
    return std::nullopt;
}

std::string_view fault_name(Fault f) noexcept {
    for (const auto& [g, n] : kNames) {
        if (g == f) return n;
    }
    return "unknown";
}

std::vector<std::string> fault_names() {
    std::vector<std::string> out;
    for (const auto& [f, n] : kNames) out.emplace_back(n);
    return out;
}

}  // namespace brwre
