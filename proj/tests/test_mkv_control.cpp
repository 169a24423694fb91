#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfpa/checks.hpp"
#include "mfpa/errors.hpp"
#include "mfpa/mkv_control.hpp"

using namespace mfpa;

namespace {

ModelSpec multitask(double kappa, InitialLaw law = InitialLaw::constant(0.0), double reservation = 0.0,
                    double b_bar = INFINITY) {
  return multitask_model({kappa, b_bar}, reservation, 1.0, law);
}

PolicyParam constant_policy(double c, std::size_t intervals = 1) {
  PolicyParam p = PolicyParam::uniform(1.0, intervals);
  p.gamma_c0.assign(intervals, c);
  return p;
}

}  // namespace

TEST_CASE("analytic multitask values") {
  const auto a0 = analytic_multitask(0.0, 0.0, 1.0, 0.0);
  CHECK(a0.value == 0.5);
  CHECK(a0.gamma_hat(0.3) == 1.0);
  for (double k : {-1.0, 0.3, 2.0}) CHECK(analytic_multitask(k, 0.0, 1.7, 0.0).gamma_hat(1.7) == 1.0);

  const auto a = analytic_multitask(0.5, 0.0, 1.0, 0.0);
  CHECK(a.value == doctest::Approx((std::exp(1.0) - 1.0) / 2.0).epsilon(1e-14));
  CHECK(a.value == doctest::Approx(0.859140914).epsilon(1e-9));
  CHECK(a.gamma_rule()(0.0, 5.0) == doctest::Approx(std::exp(0.5)));

  const auto b = analytic_multitask(0.5, 0.25, 2.0, 1.5);
  CHECK(b.value == doctest::Approx(-0.25 + std::exp(1.0) * 1.5 + 0.5 * std::expm1(2.0)));
}

TEST_CASE("closed-form integral matches Simpson quadrature") {
  for (double k : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    for (double T : {1.0, 2.5}) {
      const double quad = simpson([&](double t) { return 0.5 * std::exp(2.0 * k * (T - t)); }, 0.0, T, 10000);
      CHECK(std::fabs(0.5 * exp_square_integral(k, T) - quad) <= 1e-8);
    }
  }
}

TEST_CASE("limit objective at the analytic optimum") {
  const TimeGrid grid(1.0, 100);
  const ModelSpec m0 = multitask(0.0);
  const auto e0 = evaluate_limit_objective(m0, analytic_multitask(0.0, 0.0, 1.0, 0.0).gamma_rule(), {}, 20000, grid,
                                           SeedSpec{1});
  CHECK(std::fabs(e0.value - 0.5) <= 3.0 * e0.se + 1e-12);
  CHECK(e0.y_terminal == doctest::Approx(0.5));

  // General kappa with a start law: the bias of the left sums is O(dt).
  const double k = -0.5, R = 0.3;
  const ModelSpec m = multitask(k, InitialLaw::normal(0.4, 1.0), R, 10.0);
  const auto an = analytic_multitask(k, R, 1.0, 0.4);
  const auto e = evaluate_limit_objective(m, an.gamma_rule(), {}, 20000, grid, SeedSpec{2});
  CHECK(std::fabs(e.value - an.value) <= 3.0 * e.se + grid.dt());
}

TEST_CASE("zero policy gives the mean start minus R") {
  const TimeGrid grid(1.0, 20);
  const ModelSpec m = multitask(0.0, InitialLaw::normal(1.0, 1.0), 0.25);
  const auto e = evaluate_limit_objective(m, PolicyParam::uniform(1.0, 3), 20000, grid, SeedSpec{3});
  CHECK(std::fabs(e.value - 0.75) <= 3.0 * e.se);
  CHECK(e.y_terminal == 0.25);
}

TEST_CASE("objective is deterministic under common random numbers") {
  const TimeGrid grid(1.0, 20);
  const ModelSpec m = multitask(0.5, InitialLaw::normal(0.0, 1.0), 0.0, 10.0);
  PolicyParam p = constant_policy(0.9, 4);
  p.gamma_c1 = {0.1, -0.2, 0.0, 0.3};
  WorkerPool three(3);
  ObjectiveOptions o3;
  o3.pool = &three;
  const auto a = evaluate_limit_objective(m, p, 5000, grid, SeedSpec{4});
  const auto b = evaluate_limit_objective(m, p, 5000, grid, SeedSpec{4});
  const auto c = evaluate_limit_objective(m, p, 5000, grid, SeedSpec{4}, o3);
  CHECK(a.value == b.value);
  CHECK(a.se == b.se);
  CHECK(a.value == c.value);
  CHECK(evaluate_limit_objective(m, p, 5000, grid, SeedSpec{5}).value != a.value);
}

TEST_CASE("antithetic objective needs an even proxy") {
  ObjectiveOptions o;
  o.antithetic = true;
  const TimeGrid grid(1.0, 5);
  CHECK_THROWS_AS(evaluate_limit_objective(multitask(0.0), constant_policy(1.0), 11, grid, SeedSpec{1}, o), Error);
  const auto e = evaluate_limit_objective(multitask(0.0, InitialLaw::normal(0.0, 1.0)), constant_policy(1.0), 10,
                                          grid, SeedSpec{1}, o);
  // Paired noise cancels exactly at kappa = 0: J = c - c^2 / 2.
  CHECK(e.value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("objective is concave along a constant control") {
  const TimeGrid grid(1.0, 20);
  const ModelSpec m = multitask(0.0, InitialLaw::normal(0.0, 1.0));
  std::vector<double> values;
  for (double c : {0.0, 0.5, 1.0, 1.5, 2.0})
    values.push_back(evaluate_limit_objective(m, constant_policy(c), 5000, grid, SeedSpec{6}).value);
  for (std::size_t j = 1; j + 1 < values.size(); ++j) CHECK(values[j - 1] - 2.0 * values[j] + values[j + 1] <= 1e-12);
}

TEST_CASE("policy parameter bookkeeping") {
  PolicyParam p = PolicyParam::uniform(2.0, 4);
  CHECK(p.knots == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  CHECK(p.interval_of(0.0) == 0);
  CHECK(p.interval_of(0.5) == 1);
  CHECK(p.interval_of(0.49) == 0);
  CHECK(p.interval_of(2.0) == 3);
  CHECK(p.free_count() == 8);

  std::vector<double> v{1, 2, 3, 4, 0.1, 0.2, 0.3, 9.0};
  p.unpack(v);
  CHECK(p.gamma_c0 == std::vector<double>{1, 2, 3, 4});
  CHECK(p.gamma_c1.back() == 5.0);  // clamped into the c1 box
  CHECK(p.gamma(0.7, 2.0) == doctest::Approx(2.0 + 0.2 * 2.0));
  CHECK(p.gamma_rule()(1.9, 1.0) == doctest::Approx(9.0));
  CHECK(p.pack().size() == 8);
  CHECK_THROWS_AS(p.unpack(std::vector<double>(3, 0.0)), Error);

  p.aleph_free = true;
  CHECK(p.free_count() == 12);
  CHECK(p.aleph(1.0, 3.0) == 0.0);

  PolicyParam bad = PolicyParam::uniform(1.0, 2);
  bad.knots = {0.0, 0.6, 0.6};
  CHECK_THROWS_AS(bad.validate(1.0), ConfigError);
  bad.knots = {0.0, 0.5, 0.9};
  CHECK_THROWS_AS(bad.validate(1.0), ConfigError);
  bad.knots = {0.0, 0.5, 1.0};
  bad.gamma_c0 = {1.0};
  CHECK_THROWS_AS(bad.validate(1.0), ConfigError);
  CHECK_THROWS_AS(PolicyParam::uniform(1.0, 0), ConfigError);
}

TEST_CASE("optimizer recovers the constant optimum at zero interaction") {
  const TimeGrid grid(1.0, 20);
  const ModelSpec m = multitask(0.0, InitialLaw::normal(0.0, 1.0));
  PolicyParam start = PolicyParam::uniform(1.0, 4);
  start.gamma_state_free = false;
  OptimizeOptions opts;
  opts.budget = 800;
  const auto res = optimize_policy(m, start, 2000, grid, SeedSpec{7}, opts);
  for (double c : res.best.gamma_c0) CHECK(std::fabs(c - 1.0) <= 0.05);
  for (double c : res.best.gamma_c1) CHECK(c == 0.0);
  CHECK(res.value.value >= res.initial.value);
  CHECK(res.converged);
  CHECK(res.evaluations <= opts.budget + 10);
  CHECK_FALSE(res.trace.empty());
}

TEST_CASE("optimizer never returns less than its start") {
  const TimeGrid grid(1.0, 20);
  const ModelSpec m = multitask(0.0, InitialLaw::normal(0.0, 1.0));
  PolicyParam start = constant_policy(1.0, 2);
  OptimizeOptions opts;
  opts.budget = 200;
  const auto res = optimize_policy(m, start, 2000, grid, SeedSpec{8}, opts);
  CHECK(res.value.value >= res.initial.value);

  opts.budget = 1;
  const auto one = optimize_policy(m, constant_policy(0.2, 2), 2000, grid, SeedSpec{8}, opts);
  CHECK_FALSE(one.converged);
  CHECK(one.evaluations == 1);
  CHECK(one.value.value == one.initial.value);

  opts.budget = 0;
  CHECK_THROWS_AS(optimize_policy(m, start, 2000, grid, SeedSpec{8}, opts), ConfigError);
}

TEST_CASE("optimizer surfaces blow-ups as penalties, not crashes") {
  const TimeGrid grid(1.0, 10);
  const ModelSpec m = multitask(0.0, InitialLaw::normal(0.0, 1.0));
  PolicyParam start = constant_policy(0.5, 1);
  start.gamma_box.c0 = {-1e200, 1e200};
  OptimizeOptions opts;
  opts.budget = 60;
  opts.initial_step = 1e200;
  const auto res = optimize_policy(m, start, 200, grid, SeedSpec{9}, opts);
  CHECK(std::isfinite(res.value.value));
  CHECK(res.value.value >= res.initial.value);
}

TEST_CASE("trace csv") {
  const auto path = (std::filesystem::temp_directory_path() / "mfpa_trace_test.csv").string();
  const std::vector<TraceRow> rows{{1, 3, 0.5, 0.1}, {2, 5, 0.6, 0.05}};
  write_trace_csv(path, rows);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "iteration,evaluations,best_objective,simplex_size");
  CHECK(first == "1,3,0.5,0.10000000000000001");
  std::filesystem::remove(path);
}
