#include "doctest.h"

#include <cmath>
#include <vector>

#include "sheat/errors.hpp"
#include "sheat/noise.hpp"

using namespace sheat;

namespace {

struct Moments {
    double mean = 0, var = 0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= v.size();
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= (v.size() - 1);
    return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = moments(a), mb = moments(b);
    double c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
    c /= (a.size() - 1);
    return c / std::sqrt(ma.var * mb.var);
}

} // namespace

TEST_CASE("philox known-answer vectors") {
    using P = Philox4x32;
    CHECK(P::apply({0, 0, 0, 0}, {0, 0}) ==
          P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(P::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(P::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("grid spec") {
    GridSpec g{127, 1e-4, 0.5};
    CHECK(g.dx() == doctest::Approx(1.0 / 128));
    CHECK(g.n_steps() == 5000);
    CHECK(g.step_of(0.25) == 2500);
    CHECK_THROWS_AS(g.step_of(0.25 + 3e-5), DomainError);
    GridSpec h{10, 0.3, 1.0};
    CHECK(h.n_steps() == 4);
    CHECK(h.n_steps() * h.dt >= h.horizon - h.dt / 2);
    CHECK(g.cfl(0.5) == doctest::Approx(0.5 * 1e-4 * 128 * 128));
}

TEST_CASE("increments are deterministic in (seed, sample, step)") {
    GridSpec g{33, 1e-3, 1.0};
    NoiseStream a(42, 7, g), b(42, 7, g), c(43, 7, g), d(42, 8, g);
    CHECK(a.sample_increments(5) == b.sample_increments(5));
    CHECK(a.sample_increments(5) != c.sample_increments(5));
    CHECK(a.sample_increments(5) != d.sample_increments(5));
    CHECK(a.sample_increments(5) != a.sample_increments(6));
    CHECK_THROWS_AS(a.sample_increments(-1), DomainError);
    CHECK_THROWS_AS(a.sample_increments(g.n_steps()), DomainError);
}

TEST_CASE("cell increments have mean 0 and variance dt dx") {
    GridSpec g{16, 1e-3, 1.0};
    const int n = 100000;
    std::vector<double> draws(n);
    for (int s = 0; s < n; ++s) draws[s] = NoiseStream(1, s, g).sample_increments(3)[5];
    const auto m = moments(draws);
    const double v = g.dt * g.dx();
    CHECK(std::abs(m.mean) < 4 * std::sqrt(v / n));
    CHECK(std::abs(m.var / v - 1) < 0.05);
}

TEST_CASE("streams for different samples are uncorrelated") {
    GridSpec g{100, 1e-3, 1.0};
    std::vector<double> a, b;
    NoiseStream s0(9, 0, g), s1(9, 1, g);
    for (long k = 0; k < 1000; ++k) {
        const auto x = s0.sample_increments(k);
        const auto y = s1.sample_increments(k);
        a.insert(a.end(), x.begin(), x.end());
        b.insert(b.end(), y.begin(), y.end());
    }
    CHECK(std::abs(correlation(a, b)) < 4 / std::sqrt(double(a.size())));
    // neighbouring cells within one stream
    std::vector<double> left(a.begin(), a.end() - 1), right(a.begin() + 1, a.end());
    CHECK(std::abs(correlation(left, right)) < 4 / std::sqrt(double(left.size())));
}

TEST_CASE("spectral increments") {
    GridSpec g{31, 1e-3, 1.0};
    const int n = 100000;
    std::vector<double> m1(n), m2(n);
    for (int s = 0; s < n; ++s) {
        const auto modes = NoiseStream(5, s, g).spectral_increments(0, 4);
        m1[s] = modes[0];
        m2[s] = modes[3];
    }
    CHECK(std::abs(moments(m1).var / g.dt - 1) < 0.05);
    CHECK(std::abs(moments(m2).var / g.dt - 1) < 0.05);
    CHECK(std::abs(correlation(m1, m2)) < 4 / std::sqrt(double(n)));

    // Transform consistency with the cell increments of the same stream.
    NoiseStream st(5, 17, g);
    const auto cells = st.sample_increments(2);
    const auto modes = st.spectral_increments(2, g.n_interior);
    for (int k = 0; k < g.n_interior; ++k) {
        double acc = 0;
        for (int j = 0; j < g.n_interior; ++j) {
            acc += std::sqrt(2.0) * std::sin((k + 1) * M_PI * g.x(j)) * cells[j];
        }
        CHECK(std::abs(acc - modes[k]) < 1e-12);
    }
    CHECK_THROWS_AS(st.spectral_increments(0, 0), DomainError);
}

TEST_CASE("quadratic variation concentrates at n dt dx") {
    GridSpec g{256, 1e-4, 1.0};
    NoiseStream s(3, 0, g);
    double qv = 0;
    for (long k = 0; k < 1000; ++k) {
        for (double w : s.sample_increments(k)) qv += w * w;
    }
    qv /= 1000;
    CHECK(std::abs(qv / (g.n_interior * g.dt * g.dx()) - 1) < 0.05);
}
