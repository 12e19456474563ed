#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "epsrd/bounds.hpp"
#include "oracles.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using epsrd::EpsilonLoss;
using epsrd::Source;

namespace {

const double kAlpha = std::numbers::sqrt2;

// Convolution (g_s * l_alpha)(y) by brute-force quadrature over x, kept
// separate from the library's convolution routine.
double laplacian_convolution_oracle(double y, double s, double alpha, double eps) {
  const EpsilonLoss loss(eps);
  const auto f = [&](double x) {
    return epsrd::g_pdf(y - x, s, loss) * 0.5 * alpha * std::exp(-alpha * std::abs(x));
  };
  const double decay = std::min(alpha, std::abs(s));
  return epsrd::oracle::line_integral(f, y - eps, y + eps, decay, {0.0, y - eps, y + eps},
                                      0.5 / std::max(alpha, std::abs(s)));
}

}  // namespace

TEST_CASE("slb: endpoint examples") {
  CHECK_THAT(epsrd::slb_zero(Source::laplacian(kAlpha), EpsilonLoss(0.1)), WithinAbs(0.6136, 5e-4));
  CHECK_THAT(epsrd::slb_zero(Source::gaussian(1.0), EpsilonLoss(0.1)), WithinAbs(0.6662, 5e-4));
  for (double alpha : {0.5, kAlpha, 3.0}) {
    CHECK_THAT(epsrd::slb_zero(Source::laplacian(alpha), EpsilonLoss(0.0)), WithinAbs(1.0 / alpha, 1e-8));
  }
}

TEST_CASE("slb at eps = 0 is -log(alpha D) for the Laplacian") {
  for (double alpha : {0.5, kAlpha, 3.0}) {
    const Source l = Source::laplacian(alpha);
    for (double d : epsrd::oracle::log_space(1e-3, 1.0 / alpha, 25)) {
      CHECK_THAT(epsrd::slb(d, l, EpsilonLoss(0.0)), WithinAbs(-std::log(alpha * d), 1e-13));
    }
  }
}

TEST_CASE("slb closed form equals the parametric route") {
  for (double eps : {0.0, 0.01, 0.1, 1.0}) {
    const EpsilonLoss loss(eps);
    for (double h_p : {-2.0, 0.0, 1.346574}) {
      for (double d : epsrd::oracle::log_space(1e-4, 1e2, 50)) {
        const double parametric = h_p - epsrd::g_entropy(epsrd::slope_of_distortion(d, loss), loss);
        INFO("eps=" << eps << " D=" << d);
        CHECK_THAT(epsrd::slb(d, h_p, loss), WithinAbs(parametric, 1e-12));
      }
    }
  }
}

TEST_CASE("slb is strictly decreasing in D and rejects D <= 0") {
  const EpsilonLoss loss(0.1);
  const auto ds = epsrd::oracle::log_space(1e-5, 1e3, 200);
  for (std::size_t i = 1; i < ds.size(); ++i) {
    CHECK(epsrd::slb(ds[i], 1.0, loss) < epsrd::slb(ds[i - 1], 1.0, loss));
  }
  CHECK_THROWS_AS(epsrd::slb(0.0, 1.0, loss), std::domain_error);
  CHECK_THROWS_AS(epsrd::slb(-1.0, 1.0, loss), std::domain_error);
}

TEST_CASE("slb_zero reports a vacuous bound") {
  // Nearly all mass in one 0.01-wide cell: h_p = -0.98 log 98 < log(2 eps),
  // so the SLB stays below zero for every D.
  const Source spike =
      Source::tabulated(epsrd::Tabulated({-0.01, 0.0, 0.01}, {0.01, 0.98, 0.01}));
  const EpsilonLoss loss(0.006);
  REQUIRE(epsrd::d_max(spike, loss) > 0.0);
  CHECK_THROWS_WITH(epsrd::slb_zero(spike, loss), ContainsSubstring("SLB vacuous"));
  const Source point = Source::tabulated(epsrd::Tabulated({-0.01, 0.0, 0.01}, {0.0, 1.0, 0.0}));
  CHECK_THROWS_AS(epsrd::slb_zero(point, EpsilonLoss(0.1)), epsrd::vacuous_bound_error);
}

TEST_CASE("zero crossings are ordered") {
  for (const Source& src : {Source::laplacian(kAlpha), Source::gaussian(1.0)}) {
    const double z = epsrd::slb_zero(src, EpsilonLoss(0.1));
    const double de = epsrd::d_max(src, EpsilonLoss(0.1));
    const double d0 = epsrd::d_max(src, EpsilonLoss(0.0));
    CHECK(z < de);
    CHECK(de < d0);
  }
}

TEST_CASE("trivial bound examples and dominance over the slb") {
  CHECK(epsrd::trivial_bound_laplacian(1.0 / kAlpha, kAlpha) == 0.0);
  CHECK_THAT(epsrd::trivial_bound_laplacian(0.1, kAlpha), WithinAbs(1.95601, 1e-5));
  CHECK_THAT(epsrd::trivial_bound_laplacian(0.7071, kAlpha), WithinAbs(0.0, 1e-4));
  CHECK(epsrd::trivial_bound_laplacian(2.0, kAlpha) == 0.0);
  CHECK_THROWS_AS(epsrd::trivial_bound_laplacian(0.0, kAlpha), std::domain_error);
  const Source l = Source::laplacian(kAlpha);
  for (double eps : {0.0, 0.05, 0.1, 0.5}) {
    for (double d : epsrd::oracle::log_space(1e-4, 1.0 / kAlpha, 60)) {
      CHECK(epsrd::slb(d, l, EpsilonLoss(eps)) <= epsrd::trivial_bound_laplacian(d, kAlpha) + 1e-14);
    }
  }
}

TEST_CASE("slb at s = -alpha is negative for the Laplacian") {
  CHECK_THAT(epsrd::slb_strictness_smalls_laplacian(kAlpha, EpsilonLoss(0.1)), WithinAbs(-0.0083749464097492594, 1e-15));
  CHECK_THAT(epsrd::slb_strictness_smalls_laplacian(kAlpha, EpsilonLoss(1e-9)), WithinAbs(0.0, 1e-15));
  for (double eps : {1e-4, 0.01, 0.1, 1.0, 10.0}) {
    const EpsilonLoss loss(eps);
    const double v = epsrd::slb_strictness_smalls_laplacian(kAlpha, loss);
    CHECK(v < 0.0);
    // same number through the generic slb at D_{s=-alpha}
    const double d = epsrd::distortion_of_slope(-kAlpha, loss);
    CHECK_THAT(epsrd::slb(d, Source::laplacian(kAlpha), loss), WithinAbs(v, 1e-12));
  }
}

TEST_CASE("Laplacian auxiliaries") {
  const EpsilonLoss loss(0.1);
  const double limit = 2.0 * std::exp(-kAlpha * 0.1) * std::sinh(kAlpha * 0.1);
  CHECK_THAT(limit, WithinAbs(0.24636168355623521, 1e-15));
  CHECK_THAT(epsrd::laplacian_auxiliaries(-1e9, kAlpha, loss).c_s, WithinAbs(limit, 1e-8));
  for (double s : {-0.1, -0.5, -1.0, -2.0, -10.0, -1e4}) {
    for (double eps : {0.0, 0.01, 0.1, 1.0}) {
      CHECK(epsrd::laplacian_auxiliaries(s, kAlpha, EpsilonLoss(eps)).c_s > 0.0);
    }
  }
  CHECK_THAT(epsrd::laplacian_auxiliaries(-3.0, kAlpha, EpsilonLoss(0.0)).c_s,
             WithinRel(2.0 * kAlpha / (kAlpha + 3.0), 1e-14));
  // B_s and E_s as integrals of b_s(y) = 2 C_s r_s(y) over [eps, inf)
  for (double s : {-0.5, -3.0, -20.0}) {
    const auto aux = epsrd::laplacian_auxiliaries(s, kAlpha, loss);
    const double c = epsrd::normalizer(s, loss);
    const auto b = [&](double y) { return 2.0 * c * epsrd::r_s_pdf_laplacian(y, s, kAlpha, loss); };
    const double decay = std::min(kAlpha, std::abs(s));
    const double bi = epsrd::quad::integrate(b, 0.1, 0.1 + 40.0 / decay, 400);
    const double ei = epsrd::quad::integrate([&](double y) { return y * b(y); }, 0.1, 0.1 + 40.0 / decay, 400);
    INFO("s=" << s);
    CHECK_THAT(aux.b_int, WithinAbs(bi, 1e-10));
    CHECK_THAT(aux.e_int, WithinAbs(ei, 1e-10));
  }
}

TEST_CASE("r_s closed form matches the convolution") {
  for (double s : {-0.5, -1.0, -5.0, -20.0, -100.0}) {
    for (double eps : {0.0, 0.05, 0.1, 0.5}) {
      const EpsilonLoss loss(eps);
      for (double y : {0.0, eps, 2.0 * eps, 1.0, -0.3}) {
        const double closed = epsrd::r_s_pdf_laplacian(y, s, kAlpha, loss);
        INFO("s=" << s << " eps=" << eps << " y=" << y);
        CHECK_THAT(closed, WithinAbs(laplacian_convolution_oracle(y, s, kAlpha, eps), 1e-9));
        CHECK_THAT(closed, WithinAbs(epsrd::convolved_density(Source::laplacian(kAlpha), s, loss, y), 1e-9));
        CHECK(epsrd::r_s_pdf_laplacian(-y, s, kAlpha, loss) == closed);
      }
      const double total = epsrd::oracle::line_integral(
          [&](double y) { return epsrd::r_s_pdf_laplacian(y, s, kAlpha, loss); }, -eps, eps,
          std::min(kAlpha, std::abs(s)), {-eps, 0.0, eps}, 0.25);
      CHECK_THAT(total, WithinAbs(1.0, 1e-9));
    }
  }
}

TEST_CASE("r_s approaches the source density as |s| grows at eps = 0") {
  for (double y : {0.3, 1.0, 2.5}) {
    CHECK_THAT(epsrd::r_s_pdf_laplacian(y, -1e5, kAlpha, EpsilonLoss(0.0)),
               WithinRel(epsrd::pdf(Source::laplacian(kAlpha), y), 1e-4));
  }
}

TEST_CASE("Laplacian closed forms refuse the removable singularity") {
  const EpsilonLoss loss(0.1);
  CHECK_THROWS_AS(epsrd::r_s_pdf_laplacian(0.0, -kAlpha, kAlpha, loss), epsrd::singular_slope_error);
  CHECK_THROWS_WITH(epsrd::analytic_upper_laplacian(-kAlpha * (1.0 + 1e-7), kAlpha, loss),
                    ContainsSubstring("slope at removable singularity"));
  CHECK_NOTHROW(epsrd::analytic_upper_laplacian(-kAlpha * (1.0 + 1e-5), kAlpha, loss));
  // r_u falls back to numeric convolution inside the window, and stays
  // continuous across it.
  const Source l = Source::laplacian(kAlpha);
  const double inside = epsrd::r_u(l, -kAlpha, loss).r;
  const double below = epsrd::r_u(l, -kAlpha * (1.0 - 1e-5), loss).r;
  const double above = epsrd::r_u(l, -kAlpha * (1.0 + 1e-5), loss).r;
  CHECK_THAT(inside, WithinAbs(0.5 * (below + above), 1e-8));
}

TEST_CASE("convolved density of a tabulated source") {
  const epsrd::Tabulated t({-1.0, 0.0, 1.0}, {0.25, 0.5, 0.25});
  const Source src = Source::tabulated(t);
  const EpsilonLoss loss(0.2);
  const double s = -3.0;
  for (double y : {-2.0, -0.5, 0.0, 0.45, 1.7}) {
    const double q = epsrd::oracle::line_integral(
        [&](double x) { return epsrd::g_pdf(y - x, s, loss) * epsrd::pdf(src, x); }, -1.5, 1.5, 3.0,
        {-0.5, 0.5, y - 0.2, y + 0.2}, 0.05);
    CHECK_THAT(epsrd::convolved_density(src, s, loss, y), WithinAbs(q, 1e-12));
  }
}

TEST_CASE("r_u: sandwich and limits") {
  const EpsilonLoss loss(0.1);
  const Source l = Source::laplacian(kAlpha);
  const auto p = epsrd::r_u(l, -20.0, loss);
  CHECK(p.r >= epsrd::slb(p.d, l, loss));
  CHECK(p.s.value() == -20.0);
  const auto far = epsrd::r_u(l, -1e-3, loss);
  CHECK(far.r < 1e-3);
  CHECK(far.d >= epsrd::d_max(l, loss));
  CHECK(epsrd::slb(far.d, l, loss) <= 0.0);
}

TEST_CASE("r_u entropy quadrature is stable under refinement") {
  const Source g = Source::gaussian(1.0);
  const EpsilonLoss loss(0.1);
  const double coarse = epsrd::r_u(g, -20.0, loss, {1e-8, 0.5, 30}).raw_r;
  const double base = epsrd::r_u(g, -20.0, loss).raw_r;
  const double fine = epsrd::r_u(g, -20.0, loss, {1e-12, 0.125, 40}).raw_r;
  CHECK_THAT(coarse, WithinAbs(fine, 1e-6));
  CHECK_THAT(base, WithinAbs(fine, 1e-6));
}

TEST_CASE("upper bounds dominate r_u") {
  const Source l = Source::laplacian(kAlpha);
  const Source g = Source::gaussian(1.0);
  for (double eps : {0.0, 0.05, 0.1, 0.5}) {
    const EpsilonLoss loss(eps);
    for (double s : {-0.5, -1.0, -1.3, -1.5, -2.0, -10.0, -100.0}) {
      INFO("eps=" << eps << " s=" << s);
      const auto ru_l = epsrd::r_u(l, s, loss);
      const auto au = epsrd::analytic_upper_laplacian(s, kAlpha, loss);
      const auto ge_l = epsrd::gaussian_entropy_bound(l, s, loss);
      CHECK(ru_l.raw_r <= au.raw_r + 1e-9);
      CHECK(ru_l.raw_r <= ge_l.raw_r + 1e-9);
      CHECK(ru_l.r <= au.r + 1e-9);
      const auto ru_g = epsrd::r_u(g, s, loss);
      const auto ge_g = epsrd::gaussian_entropy_bound(g, s, loss);
      CHECK(ru_g.raw_r <= ge_g.raw_r + 1e-9);
      CHECK(ru_g.d == ge_g.d);
    }
  }
}

TEST_CASE("Gaussian entropy bound: independent evaluation and small-D gap") {
  // Laplacian(sqrt 2) has v_p = 1.
  const double s = -5.0, eps = 0.1;
  const double k = 5.0;
  const double c = 2.0 * (1.0 + k * eps) / k;
  const double h = std::log(c) + 1.0 / (1.0 + k * eps);
  const double v = (2.0 / c) * (std::pow(eps, 3) / 3.0 + (eps * eps + 2.0 * eps / k + 2.0 / (k * k)) / k);
  const double expected = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * (1.0 + v)) - h;
  CHECK_THAT(epsrd::gaussian_entropy_bound(Source::laplacian(kAlpha), s, EpsilonLoss(eps)).r,
             WithinAbs(expected, 1e-13));

  for (double sigma2 : {0.5, 1.0, 4.0}) {
    const Source g = Source::gaussian(sigma2);
    const EpsilonLoss loss(0.1);
    const auto ge = epsrd::gaussian_entropy_bound(g, -1e6, loss);
    const double gap = ge.r - epsrd::slb(ge.d, g, loss);
    const double limit = 0.5 * std::log1p(0.01 / (3.0 * sigma2));
    CHECK_THAT(gap, WithinAbs(limit, 1e-6));
    CHECK(gap <= 0.01 / (6.0 * sigma2));
  }
}

TEST_CASE("analytic upper bound: small-D gap") {
  for (double eps : {0.01, 0.02, 0.05}) {
    const EpsilonLoss loss(eps);
    const auto au = epsrd::analytic_upper_laplacian(-1e6, kAlpha, loss);
    const double gap = au.r - epsrd::slb(au.d, Source::laplacian(kAlpha), loss);
    const double ae2 = std::pow(kAlpha * eps, 2);
    INFO("eps=" << eps << " gap/(alpha eps)^2=" << gap / ae2);
    CHECK(gap >= 0.0);
    CHECK(gap <= 0.6 * ae2);
  }
}

TEST_CASE("negative analytic values are clamped and flagged") {
  const auto neg = epsrd::RDPoint::clamped_rate(0.7, -0.25, -0.1);
  CHECK(neg.clamped);
  CHECK(neg.r == 0.0);
  CHECK(neg.raw_r == -0.25);
  CHECK(neg.s.value() == -0.1);
  const auto pos = epsrd::RDPoint::clamped_rate(0.1, 1.5);
  CHECK_FALSE(pos.clamped);
  CHECK(pos.r == 1.5);
  // The upper bounds report their flag consistently with the raw value.
  const Source l = Source::laplacian(kAlpha);
  for (double s : {-0.01, -0.5, -1.0, -5.0, -100.0}) {
    for (const auto& p : {epsrd::analytic_upper_laplacian(s, kAlpha, EpsilonLoss(0.1)),
                          epsrd::gaussian_entropy_bound(l, s, EpsilonLoss(0.1)),
                          epsrd::r_u(l, s, EpsilonLoss(0.1))}) {
      CHECK(p.r >= 0.0);
      CHECK(p.clamped == (p.raw_r < 0.0));
      CHECK(p.r == std::max(p.raw_r, 0.0));
    }
  }
}
