#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nlva {

// Deterministic random source. std::uniform_real_distribution and friends are
// implementation-defined, so all draws are derived from the standardized
// mt19937_64 stream directly; the same seed yields the same values on every
// platform and compiler.
class Rng {
  public:
	explicit Rng(std::uint64_t seed) : gen_(seed) {}

	// uniform in [0,1), 53-bit resolution
	double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	// integer in [0,n), n >= 1
	std::uint64_t uniform_int(std::uint64_t n) {
		std::uint64_t v = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
		return v < n ? v : n - 1;
	}

	// standard normal via Box-Muller
	double normal() {
		if (have_spare_) {
			have_spare_ = false;
			return spare_;
		}
		double u1 = uniform();
		double u2 = uniform();
		while (u1 <= 0.0) u1 = uniform();
		double r = std::sqrt(-2.0 * std::log(u1));
		double a = 6.283185307179586476925286766559 * u2;
		spare_ = r * std::sin(a);
		have_spare_ = true;
		return r * std::cos(a);
	}

  private:
	std::mt19937_64 gen_;
	double spare_ = 0.0;
	bool have_spare_ = false;
};

} // namespace nlva
