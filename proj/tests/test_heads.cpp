#include <doctest.h>

#include <cmath>
#include <random>

#include "affect/errors.hpp"
#include "affect/heads.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace affect;

namespace {

HeadArchitecture arch_for(Task task, std::optional<std::size_t> hidden, std::size_t dim = 6) {
  return HeadArchitecture::for_task(task, FeatureKind::EmbeddingsOnly, dim, hidden);
}

HeadModel zeroed(const HeadArchitecture& arch) { return init_head(arch, 0).zeros_like(); }

std::vector<double> random_input(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("init is deterministic in the seed") {
  const auto arch = arch_for(Task::MultiTask, 16);
  CHECK(init_head(arch, 5) == init_head(arch, 5));
  CHECK_FALSE(init_head(arch, 5) == init_head(arch, 6));
}

TEST_CASE("without a hidden layer each group has one weight matrix") {
  const auto m = init_head(arch_for(Task::MultiTask, std::nullopt), 1);
  CHECK_FALSE(m.hidden.has_value());
  REQUIRE(m.expression.has_value());
  REQUIRE(m.valence_arousal.has_value());
  REQUIRE(m.action_units.has_value());
  CHECK(m.expression->weight.rows() == 8);
  CHECK(m.expression->weight.cols() == 6);
  CHECK(m.valence_arousal->weight.rows() == 2);
  CHECK(m.action_units->weight.rows() == 12);
  CHECK(m.blocks().size() == 6);
}

TEST_CASE("init biases are exactly zero and weights lie within the fan-in bound") {
  const auto m = init_head(arch_for(Task::MultiTask, 32, 20), 9);
  for (const auto& b : m.blocks()) {
    const bool is_bias = b.name.find("bias") != std::string::npos;
    const double bound = b.name.rfind("hidden", 0) == 0 ? 1 / std::sqrt(20.0) : 1 / std::sqrt(32.0);
    for (double v : b.values) {
      if (is_bias) CHECK(v == 0.0);
      else CHECK(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("a group's initial weights do not depend on later groups") {
  const auto expr_only = init_head(arch_for(Task::Expression, std::nullopt), 4);
  const auto all = init_head(arch_for(Task::MultiTask, std::nullopt), 4);
  CHECK(*expr_only.expression == *all.expression);
}

TEST_CASE("architecture validation") {
  auto a = arch_for(Task::Expression, std::nullopt);
  a.input_dim = 0;
  CHECK_THROWS_AS(init_head(a, 0), ConfigError);
  a = arch_for(Task::Expression, std::nullopt);
  a.expression = false;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a = arch_for(Task::Expression, std::size_t{0});
  CHECK_THROWS_AS(a.validate(), ConfigError);
  CHECK(HeadArchitecture::for_task(Task::Expression, FeatureKind::Concatenated, 10, {}).input_dim == 18);
}

TEST_CASE("zero weights give the activation's value at zero") {
  const std::vector<double> x(6, 0.7);
  SUBCASE("expression") {
    const auto p = forward(zeroed(arch_for(Task::Expression, std::nullopt)), x);
    REQUIRE(p.expr_probs);
    for (double v : *p.expr_probs) CHECK(v == 0.125);
    CHECK_FALSE(p.va.has_value());
  }
  SUBCASE("valence-arousal") {
    const auto p = forward(zeroed(arch_for(Task::ValenceArousal, std::nullopt)), x);
    REQUIRE(p.va);
    CHECK(p.va->valence == 0.0);
    CHECK(p.va->arousal == 0.0);
  }
  SUBCASE("action units") {
    const auto p = forward(zeroed(arch_for(Task::ActionUnits, 4)), x);
    REQUIRE(p.au_probs);
    for (double v : *p.au_probs) CHECK(v == 0.5);
  }
}

TEST_CASE("forward rejects a wrong input width") {
  const auto m = init_head(arch_for(Task::Expression, std::nullopt), 1);
  CHECK_THROWS_AS(forward(m, std::vector<double>(5, 0.0)), ShapeError);
}

TEST_CASE("softmax sums to one and outputs stay in range for extreme inputs") {
  std::mt19937_64 rng(7);
  auto m = init_head(arch_for(Task::MultiTask, 10), 2);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_input(6, rng);
    for (auto& v : x) v *= trial < 100 ? 1.0 : 1e4;
    const auto p = forward(m, x);
    double s = 0;
    for (double v : *p.expr_probs) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-6);
    CHECK(std::abs(p.va->valence) <= 1.0);
    for (double v : *p.au_probs) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("forward is pure") {
  std::mt19937_64 rng(3);
  const auto m = init_head(arch_for(Task::MultiTask, 8), 3);
  const auto x = random_input(6, rng);
  CHECK(forward(m, x) == forward(m, x));
}

TEST_CASE("raising one AU bias raises only that AU probability") {
  std::mt19937_64 rng(11);
  auto m = init_head(arch_for(Task::ActionUnits, std::nullopt), 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_input(6, rng);
    const auto before = *forward(m, x).au_probs;
    auto bumped = m;
    const int unit = trial % 12;
    bumped.action_units->bias[unit] += 0.3;
    const auto after = *forward(bumped, x).au_probs;
    for (int a = 0; a < 12; ++a) {
      if (a == unit) CHECK(after[a] > before[a]);
      else CHECK(after[a] == before[a]);
    }
  }
}

TEST_CASE("batched forward matches per-frame forward") {
  std::mt19937_64 rng(5);
  const auto m = init_head(arch_for(Task::MultiTask, 12), 8);
  Eigen::MatrixXd batch(9, 6);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 9; ++r) {
    rows.push_back(random_input(6, rng));
    for (int c = 0; c < 6; ++c) batch(r, c) = rows.back()[c];
  }
  const auto fwd = forward_batch(m, batch);
  for (int r = 0; r < 9; ++r) {
    const auto p = forward(m, rows[r]);
    for (int c = 0; c < 8; ++c) CHECK(fwd.expr_probs(r, c) == doctest::Approx((*p.expr_probs)[c]).epsilon(1e-14));
    CHECK(fwd.va(r, 1) == doctest::Approx(p.va->arousal).epsilon(1e-14));
    CHECK(fwd.au_probs(r, 11) == doctest::Approx((*p.au_probs)[11]).epsilon(1e-14));
  }
}

TEST_CASE("backward matches finite differences of a linear functional of the outputs") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0, 1);
  for (std::optional<std::size_t> hidden : {std::optional<std::size_t>{}, std::optional<std::size_t>{7}}) {
    const auto model = init_head(arch_for(Task::MultiTask, hidden, 5), 23);
    Eigen::MatrixXd x(4, 5);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    OutputGradients og;
    og.expr_logits = Eigen::MatrixXd::NullaryExpr(4, 8, [&] { return g(rng); });
    og.va_pre = Eigen::MatrixXd::NullaryExpr(4, 2, [&] { return g(rng); });
    og.au_logits = Eigen::MatrixXd::NullaryExpr(4, 12, [&] { return g(rng); });
    auto objective = [&](const HeadModel& m) {
      const auto f = forward_batch(m, x);
      return (og.expr_logits.cwiseProduct(f.expr_logits)).sum() + (og.va_pre.cwiseProduct(f.va_pre)).sum() +
             (og.au_logits.cwiseProduct(f.au_logits)).sum();
    };
    const auto grads = backward(model, x, forward_batch(model, x), og);
    const auto gblocks = grads.blocks();
    auto probe = model;
    auto pblocks = probe.blocks();
    for (std::size_t b = 0; b < pblocks.size(); ++b) {
      std::vector<double> analytic, numeric;
      for (std::size_t i = 0; i < pblocks[b].values.size(); ++i) {
        const double x0 = pblocks[b].values[i];
        pblocks[b].values[i] = x0 + 1e-6;
        const double up = objective(probe);
        pblocks[b].values[i] = x0 - 1e-6;
        const double down = objective(probe);
        pblocks[b].values[i] = x0;
        numeric.push_back((up - down) / 2e-6);
        analytic.push_back(gblocks[b].values[i]);
      }
      INFO("block " << pblocks[b].name);
      CHECK(oracle::relative_error(analytic, numeric) < 1e-5);
    }
  }
}

TEST_CASE("predict_track leaves undetected frames empty") {
  std::mt19937_64 rng(1);
  const auto m = init_head(arch_for(Task::Expression, std::nullopt), 1);
  SUBCASE("all detected") {
    const auto t = fixture::labeled_track("t", 8, 6, 4);
    const auto p = predict_track(m, t, FeatureKind::EmbeddingsOnly);
    REQUIRE(p.size() == 8);
    for (const auto& x : p) CHECK(x.has_value());
    CHECK(*p[2] == forward(m, effective_input(t.frames[2].features, FeatureKind::EmbeddingsOnly)));
  }
  SUBCASE("frames 3-5 undetected") {
    auto t = fixture::labeled_track("t", 8, 6, 4);
    for (int i = 3; i <= 5; ++i) t.frames[i].features = fixture::missing_frame(i);
    const auto p = predict_track(m, t, FeatureKind::EmbeddingsOnly);
    for (int i = 0; i < 8; ++i) CHECK(p[i].has_value() == (i < 3 || i > 5));
  }
  SUBCASE("empty track") {
    VideoTrack t;
    CHECK(predict_track(m, t, FeatureKind::EmbeddingsOnly).empty());
  }
  SUBCASE("wrong width names the frame") {
    auto t = fixture::labeled_track("clipX", 3, 6, 4);
    t.frames[1].features.embedding.pop_back();
    try {
      predict_track(m, t, FeatureKind::EmbeddingsOnly);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("clipX frame 1") != std::string::npos);
    }
  }
}

TEST_CASE("checkpoint round-trips exactly") {
  fixture::TempDir dir("ckpt");
  for (std::optional<std::size_t> hidden : {std::optional<std::size_t>{}, std::optional<std::size_t>{9}}) {
    const auto m = init_head(HeadArchitecture::for_task(Task::MultiTask, FeatureKind::Concatenated, 5, hidden), 77);
    CHECK(checkpoint_from_json(checkpoint_to_json(m)) == m);
    save_checkpoint(dir.path / "c.json", m);
    CHECK(load_checkpoint(dir.path / "c.json") == m);
  }
}

TEST_CASE("hidden width is visible in the checkpoint architecture block") {
  const auto a = checkpoint_to_json(init_head(arch_for(Task::Expression, std::nullopt), 1));
  const auto b = checkpoint_to_json(init_head(arch_for(Task::Expression, 128), 1));
  CHECK(a.find("\"hidden_units\": null") != std::string::npos);
  CHECK(b.find("\"hidden_units\": 128") != std::string::npos);
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS_AS(checkpoint_from_json("not json"), Error);
  CHECK_THROWS_AS(checkpoint_from_json("{\"format\": \"other\"}"), Error);
  auto text = checkpoint_to_json(init_head(arch_for(Task::Expression, std::nullopt), 1));
  text.replace(text.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(checkpoint_from_json(text), Error);
}

TEST_CASE("compatibility check names both widths") {
  const auto m = init_head(arch_for(Task::Expression, std::nullopt, 32), 1);
  CHECK_NOTHROW(check_compatible(m, 32));
  try {
    check_compatible(m, 16);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string w = e.what();
    CHECK(w.find("32") != std::string::npos);
    CHECK(w.find("16") != std::string::npos);
  }
}
