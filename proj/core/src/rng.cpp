#include "flowlab/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace flowlab {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    const std::int64_t span = hi - lo + 1;
    std::int64_t v = lo + static_cast<std::int64_t>(uniform01() * static_cast<double>(span));
    return v > hi ? hi : v;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 shifted away from 0 so log is finite
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

void Rng::fill_normal(Tensor& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = normal();
}

Tensor Rng::normal_matrix(std::int64_t rows, std::int64_t cols) {
    Tensor t({rows, cols});
    fill_normal(t);
    return t;
}

std::string Rng::save_state() const {
    std::uint64_t spare_bits = 0;
    static_assert(sizeof(spare_bits) == sizeof(spare_));
    std::memcpy(&spare_bits, &spare_, sizeof(spare_bits));
    std::ostringstream os;
    os << engine_ << " " << (has_spare_ ? 1 : 0) << " " << spare_bits;
    return os.str();
}

void Rng::load_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    std::uint64_t spare_bits = 0;
    is >> engine_ >> spare_flag >> spare_bits;
    if (is.fail()) throw std::runtime_error("rng: malformed state string");
    has_spare_ = spare_flag != 0;
    std::memcpy(&spare_, &spare_bits, sizeof(spare_));
}

}  // namespace flowlab
