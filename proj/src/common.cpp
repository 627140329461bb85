#include "slat/common.hpp"

#include <charconv>
#include <system_error>

namespace slat {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::InvalidInput: return "invalid-input";
        case ErrorCode::EmptyTrajectory: return "empty-trajectory";
        case ErrorCode::Config: return "config";
        case ErrorCode::Io: return "io";
        case ErrorCode::NonFinite: return "non-finite";
        case ErrorCode::Divergence: return "divergence";
    }
    return "unknown";
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    // FNV-1a over the tag, then one splitmix round to decorrelate.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    Rng mixer(master ^ h ^ (index * 0xD1B54A32D192ED03ull));
    return mixer.next_u64();
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) fail(ErrorCode::InvalidInput, "cannot format value");
    return std::string(buf, ptr);
}

}  // namespace slat
