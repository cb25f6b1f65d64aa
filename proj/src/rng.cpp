#include "qbm/rng.hpp"

#include <bit>
#include <sstream>

#include "qbm/error.hpp"

namespace qbm {

std::string Rng::state() const {
    std::ostringstream out;
    out << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return out.str();
}

void Rng::set_state(const std::string& text) {
    std::istringstream in(text);
    int spare_flag = 0;
    std::uint64_t spare_bits = 0;
    in >> engine_ >> spare_flag >> spare_bits;
    if (!in) {
        throw Error(ErrorCode::io, "malformed rng state");
    }
    has_spare_ = spare_flag != 0;
    spare_ = std::bit_cast<double>(spare_bits);
}

} // namespace qbm
