#include <catch_amalgamated.hpp>
#include <cstring>
#include <map>
#include <set>

#include "embercall/models/cnb.hpp"
#include "embercall/models/linear.hpp"
#include "embercall/models/metrics.hpp"
#include "embercall/models/mlp.hpp"
#include "embercall/models/ovr.hpp"
#include "embercall/models/search.hpp"
#include "embercall/models/serialize.hpp"
#include "embercall/models/stack.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace embercall;
using namespace embercall::models;
using namespace embercall::oracle;
using Catch::Approx;

namespace {

void check_probabilities(const Matrix& P, bool rows_sum_to_one) {
  CHECK(P.allFinite());
  CHECK(P.minCoeff() >= 0.0);
  CHECK(P.maxCoeff() <= 1.0);
  if (rows_sum_to_one)
    for (Eigen::Index r = 0; r < P.rows(); ++r) CHECK(P.row(r).sum() == Approx(1.0).margin(1e-9));
}

/// Logistic regression that only sees a subset of the columns.
class ColumnModel final : public Classifier {
 public:
  ColumnModel(LinearModel inner, std::vector<int> cols) : inner_(std::move(inner)), cols_(std::move(cols)) {}
  std::string kind() const override { return "columns"; }
  int num_classes() const override { return inner_.num_classes(); }
  int input_dim() const override { return 4; }
  Matrix predict_proba(const Matrix& X) const override { return inner_.predict_proba(X(Eigen::all, cols_)); }
  Json describe() const override { return {{"kind", kind()}}; }
  void append_params(std::vector<double>&) const override {}

 private:
  LinearModel inner_;
  std::vector<int> cols_;
};

ModelFactory column_factory(std::vector<int> cols) {
  return [cols](const Matrix& X, std::span<const int> y, int C, std::span<const double> w) {
    return std::make_unique<ColumnModel>(fit_logreg(X(Eigen::all, cols), y, C, w), cols);
  };
}

ModelFactory logreg_factory(double l2 = 1e-3) {
  return [l2](const Matrix& X, std::span<const int> y, int C, std::span<const double> w) {
    return std::make_unique<LinearModel>(fit_logreg(X, y, C, w, {l2}));
  };
}

}  // namespace

TEST_CASE("logreg gradient matches central differences", "[models]") {
  const auto d = blobs(10, 3, 4, 2.0, 1);
  Rng rng(3);
  for (int point = 0; point < 10; ++point) CHECK(logreg_gradient_error(d, 3, 0.1, rng) < 1e-4);
}

TEST_CASE("logreg training", "[models]") {
  SECTION("separable data is fit with a monotone loss") {
    const auto d = separable(400, 5, 7);
    const auto m = fit_logreg(d.X, d.y, 2);
    CHECK(accuracy(m, d) >= 0.99);
    REQUIRE(m.loss_trace.size() >= 2);
    for (std::size_t i = 1; i < m.loss_trace.size(); ++i) CHECK(m.loss_trace[i] <= m.loss_trace[i - 1]);
    check_probabilities(m.predict_proba(d.X), true);
  }
  SECTION("strong regularization shrinks to the class priors") {
    Data d = blobs(30, 3, 2, 3.0, 5);
    d.y.resize(60);  // priors 1/2, 1/2, 0 -> drop the third class
    d.X.conservativeResize(60, 2);
    d.y[0] = 2;      // priors 29/60, 30/60, 1/60
    const auto m = fit_logreg(d.X, d.y, 3, {}, {1e6});
    CHECK(m.W.cwiseAbs().maxCoeff() < 1e-4);
    const Matrix P = m.predict_proba(d.X);
    CHECK(P(5, 0) == Approx(29.0 / 60).margin(1e-3));
    CHECK(P(5, 1) == Approx(30.0 / 60).margin(1e-3));
    CHECK(P(5, 2) == Approx(1.0 / 60).margin(1e-3));
  }
  SECTION("deterministic and validated") {
    const auto d = blobs(20, 3, 3, 2.0, 8);
    const auto a = fit_logreg(d.X, d.y, 3);
    const auto b = fit_logreg(d.X, d.y, 3);
    CHECK(a.W == b.W);
    const std::vector<int> one(d.y.size(), 1);
    CHECK_THROWS_AS(fit_logreg(d.X, one, 3), ValidationError);
    std::vector<int> bad = d.y;
    bad[0] = 3;
    CHECK_THROWS_AS(fit_logreg(d.X, bad, 3), ValidationError);
  }
}

TEST_CASE("complement NB matches the brute-force formula", "[models][property]") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 2 + static_cast<int>(rng.index(9));
    const int dim = 1 + static_cast<int>(rng.index(10));
    const int n = C + static_cast<int>(rng.index(20));
    std::vector<std::vector<double>> X(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      y[static_cast<std::size_t>(j)] = j < C ? j : static_cast<int>(rng.index(static_cast<std::size_t>(C)));
      for (auto& v : X[static_cast<std::size_t>(j)]) v = static_cast<double>(rng.index(6));
    }
    const double alpha = trial % 2 == 0 ? 1.0 : 0.25;
    int passes = 0;
    const auto m = fit_cnb(CountingRows{&X, &passes}, y, C, alpha);
    CHECK(passes <= 2);
    const Matrix expected = brute_force_cnb(X, y, C, alpha);
    CHECK(m.w == expected);

    const Matrix Xm = to_matrix(X);
    const Matrix brute_scores = -(Xm * expected.transpose());
    CHECK(argmax_rows(m.predict_proba(Xm)) == argmax_rows(brute_scores));
    CHECK(argmax_rows(m.predict_proba(Xm * 3.5)) == argmax_rows(m.predict_proba(Xm)));
  }
}

TEST_CASE("complement NB behaviour", "[models]") {
  Matrix X(4, 4);
  X << 3, 1, 0, 0,  //
      2, 2, 0, 0,   //
      0, 0, 1, 4,   //
      0, 0, 2, 2;
  const std::vector<int> y{0, 0, 1, 1};
  const auto m = fit_cnb(X, y, 2);
  CHECK(argmax_rows(m.predict_proba(X)) == y);
  check_probabilities(m.predict_proba(X), true);
  Matrix neg = X;
  neg(1, 2) = -0.5;
  CHECK_THROWS_WITH(fit_cnb(neg, y, 2), Catch::Matchers::ContainsSubstring("complement NB requires nonnegative features"));
  CHECK_THROWS_AS(m.predict_proba(neg), ValidationError);
}

TEST_CASE("MLP gradient matches central differences", "[models]") {
  const auto d = blobs(6, 2, 2, 1.0, 4);
  MlpOptions opt;
  opt.hidden = 4;
  opt.seed = 12;
  MlpModel m = init_mlp(2, 2, opt);
  Rng rng(1);
  for (auto& v : m.b1) v = rng.uniform(-0.1, 0.1);
  CHECK(mlp_gradient_error(m, d) < 1e-3);
}

TEST_CASE("MLP training", "[models]") {
  SECTION("XOR") {
    const auto d = xor_data(200, 2);
    MlpOptions opt;
    opt.hidden = 8;
    opt.lr = 0.1;
    opt.epochs = 300;
    opt.seed = 3;
    const auto m = fit_mlp(d.X, d.y, 2, opt);
    CHECK(accuracy(m, d) >= 0.95);
    CHECK(m.loss_curve.size() == 300);
    CHECK(m.loss_curve.back() < m.loss_curve.front());
    check_probabilities(m.predict_proba(d.X), true);
  }
  SECTION("one hidden unit separates linear data") {
    const auto d = separable(200, 3, 5);
    MlpOptions opt;
    opt.hidden = 1;
    opt.epochs = 100;
    opt.seed = 1;
    CHECK(accuracy(fit_mlp(d.X, d.y, 2, opt), d) >= 0.95);
  }
  SECTION("divergence is reported") {
    auto d = separable(40, 2, 5);
    d.X *= 1e200;
    MlpOptions opt;
    opt.hidden = 2;
    opt.lr = 1e100;
    opt.epochs = 3;
    CHECK_THROWS_WITH(fit_mlp(d.X, d.y, 2, opt), Catch::Matchers::ContainsSubstring("non-finite loss at epoch"));
  }
  SECTION("seeded") {
    const auto d = blobs(20, 3, 2, 2.0, 1);
    MlpOptions opt;
    opt.hidden = 5;
    opt.epochs = 5;
    opt.seed = 9;
    CHECK(fit_mlp(d.X, d.y, 3, opt).W1 == fit_mlp(d.X, d.y, 3, opt).W1);
    CHECK_THROWS_AS(init_mlp(2, 2, MlpOptions{0}), ValidationError);
  }
}

TEST_CASE("one-vs-rest", "[models]") {
  const auto d = blobs(60, 3, 3, 5.0, 21);
  std::vector<std::vector<int>> sets;
  for (int c : d.y) sets.push_back({c});
  SECTION("agrees with the multinomial model on separable data") {
    const auto ovr = fit_ovr(d.X, sets, 3);
    const auto multi = fit_logreg(d.X, d.y, 3);
    const auto a = argmax_rows(ovr.predict_proba(d.X));
    const auto b = argmax_rows(multi.predict_proba(d.X));
    int agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
    CHECK(agree >= 0.95 * static_cast<double>(a.size()));
    check_probabilities(ovr.predict_proba(d.X), false);
  }
  SECTION("absent classes are skipped and predict zero") {
    const auto ovr = fit_ovr(d.X, sets, 5);
    CHECK(ovr.skipped == std::vector<int>{3, 4});
    const Matrix P = ovr.predict_proba(d.X);
    CHECK(P.col(3).maxCoeff() == 0.0);
    CHECK(P.col(4).maxCoeff() == 0.0);
  }
  SECTION("a multi-label row is a positive for each of its classes") {
    auto multi = sets;
    multi[0] = {0, 3};  // class 3's only positive
    const auto ovr = fit_ovr(d.X, multi, 4);
    CHECK(ovr.skipped.empty());
    const Matrix P = ovr.predict_proba(d.X);
    CHECK(P(0, 3) > P(100, 3));
    CHECK(P(0, 0) > 0.5);
  }
}

TEST_CASE("stacking", "[models]") {
  SECTION("a single base is recalibrated, not changed") {
    const auto d = blobs(50, 3, 3, 4.0, 13);
    const std::vector<ModelFactory> bases{logreg_factory()};
    const auto stack = fit_stack(bases, d.X, d.y, 3, {5, 1});
    const auto base = fit_logreg(d.X, d.y, 3);
    const auto a = argmax_rows(stack.predict_proba(d.X));
    const auto b = argmax_rows(base.predict_proba(d.X));
    int agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
    CHECK(agree >= 0.99 * static_cast<double>(a.size()));
    CHECK(stack.meta.input_dim() == 3);
    check_probabilities(stack.predict_proba(d.X), true);
  }
  SECTION("identical bases give duplicated meta blocks") {
    const auto d = blobs(30, 2, 2, 3.0, 2);
    const std::vector<ModelFactory> bases{logreg_factory(), logreg_factory()};
    const auto stack = fit_stack(bases, d.X, d.y, 2, {3, 4});
    const Matrix F = stack.meta_features(d.X);
    REQUIRE(F.cols() == 4);
    CHECK(F.leftCols(2) == F.rightCols(2));
    check_probabilities(stack.predict_proba(d.X), true);
  }
  SECTION("complementary views beat either view alone") {
    Data d;
    Rng rng(6);
    d.X.resize(400, 4);
    for (int i = 0; i < 400; ++i) {
      const int a = i % 2, b = (i / 2) % 2;
      d.X(i, 0) = (a ? 2.0 : -2.0) + 0.5 * rng.normal();
      d.X(i, 1) = rng.normal();
      d.X(i, 2) = (b ? 2.0 : -2.0) + 0.5 * rng.normal();
      d.X(i, 3) = rng.normal();
      d.y.push_back(2 * a + b);
    }
    const std::vector<ModelFactory> bases{column_factory({0, 1}), column_factory({2, 3})};
    const auto stack = fit_stack(bases, d.X, d.y, 4, {5, 2});
    const double stacked = accuracy(stack, d);
    const double view1 = accuracy(*column_factory({0, 1})(d.X, d.y, 4, {}), d);
    const double view2 = accuracy(*column_factory({2, 3})(d.X, d.y, 4, {}), d);
    CHECK(view1 < 0.6);
    CHECK(view2 < 0.6);
    CHECK(stacked > 0.95);
  }
  SECTION("a fold missing a class is merged with a warning") {
    auto d = blobs(20, 2, 2, 3.0, 9);
    d.X.conservativeResize(42, 2);
    d.X.row(40) << 10, 10;
    d.X.row(41) << 10, 11;
    d.y.push_back(2);
    d.y.push_back(2);
    const std::vector<ModelFactory> bases{logreg_factory()};
    const auto stack = fit_stack(bases, d.X, d.y, 3, {5, 0});
    CHECK_FALSE(stack.warnings.empty());
    CHECK(stack.folds_used < 5);
    CHECK(stack.folds_used >= 2);
  }
}

TEST_CASE("metrics", "[models]") {
  const std::vector<int> truth{0, 1, 0, 1};
  const auto perfect = evaluate(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_precision == 1.0);
  const std::vector<int> all_zero{0, 0, 0, 0};
  const auto lazy = evaluate(truth, all_zero);
  CHECK(lazy.accuracy == 0.5);
  CHECK(lazy.macro_precision == 0.25);
  REQUIRE(lazy.per_class.size() == 2);
  CHECK(lazy.per_class[1].predicted == 0);
  CHECK(lazy.per_class[1].precision == 0.0);
  CHECK_THROWS_AS(evaluate(truth, std::vector<int>{0}), ValidationError);

  std::vector<int> binary(1000, 1);
  std::fill(binary.begin(), binary.begin() + 773, 0);
  CHECK(nocall_prediction_report(binary) == "predicted 77.3% of the samples as having no birdcalls");
  const std::vector<std::string> names{"a", "b"};
  CHECK(lazy.to_json(names).at("per_class").size() == 2);
}

TEST_CASE("k-fold assignment", "[models]") {
  std::vector<std::string> groups;
  for (int i = 0; i < 60; ++i) groups.push_back("g" + std::to_string(i % 13));
  const auto folds = group_kfold(groups, 4, 3);
  std::map<std::string, int> fold_of;
  std::set<int> used;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, fresh] = fold_of.emplace(groups[i], folds[i]);
    CHECK(it->second == folds[i]);
    used.insert(folds[i]);
  }
  CHECK(used.size() == 4);
  CHECK(group_kfold(groups, 4, 3) == folds);

  std::vector<int> y;
  for (int i = 0; i < 50; ++i) y.push_back(i < 40 ? 0 : 1);
  const auto strat = stratified_kfold(y, 5, 1);
  for (int f = 0; f < 5; ++f) {
    int zeros = 0, ones = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (strat[i] == f) (y[i] == 0 ? zeros : ones)++;
    CHECK(zeros == 8);
    CHECK(ones == 2);
  }
  CHECK_THROWS_AS(group_kfold(groups, 20, 1), ValidationError);
}

TEST_CASE("random search", "[models]") {
  SearchSpec spec{{{"lambda", 0.0, 1.0, false, false}}, 1, 5, 2, "score"};
  SECTION("budget one returns its draw") {
    const auto r = random_search(spec, [](const Params& p, int) { return -p.at("lambda"); });
    REQUIRE(r.trials.size() == 1);
    CHECK(r.best == r.trials[0].params);
    CHECK(r.best_trial == 0);
  }
  SECTION("same seed, same trials") {
    spec.budget = 8;
    spec.ranges.push_back({"h", 8, 128, false, true});
    spec.ranges.push_back({"l2", 1e-5, 1.0, true, false});
    const auto a = random_search(spec, [](const Params& p, int f) { return p.at("lambda") * (f + 1); });
    const auto b = random_search(spec, [](const Params& p, int f) { return p.at("lambda") * (f + 1); });
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
      CHECK(a.trials[i].params == b.trials[i].params);
      const double h = a.trials[i].params.at("h");
      CHECK(h == std::round(h));
      CHECK(a.trials[i].params.at("l2") >= 1e-5);
      CHECK(a.trials[i].params.at("l2") <= 1.0);
    }
    test::TempDir dir("search");
    a.write_csv(dir / "t.csv", "score");
    const auto csv = read_csv(dir / "t.csv");
    CHECK(csv.size() == 9);
    CHECK(csv[0][0] == "trial");
  }
  SECTION("best draw is the one closest to the optimum") {
    spec.budget = 200;
    const double target = 0.3141;
    const auto r = random_search(spec, [&](const Params& p, int) {
      const double d = p.at("lambda") - target;
      return -d * d;
    });
    double closest = 1.0;
    for (const auto& t : r.trials) closest = std::min(closest, std::fabs(t.params.at("lambda") - target));
    CHECK(std::fabs(r.best.at("lambda") - target) == closest);
    CHECK(closest < 0.05);
  }
  SECTION("failures") {
    spec.budget = 3;
    int calls = 0;
    const auto r = random_search(spec, [&](const Params& p, int) -> double {
      if (calls++ < 2) throw RuntimeError("boom");
      return p.at("lambda");
    });
    CHECK(r.best_trial == 2);
    CHECK(r.trials[0].error.has_value());
    CHECK_THROWS_AS(random_search(spec, [](const Params&, int) -> double { throw RuntimeError("always"); }),
                    RuntimeError);
    spec.budget = 0;
    CHECK_THROWS_AS(random_search(spec, [](const Params&, int) { return 0.0; }), ValidationError);
  }
}

TEST_CASE("model files round-trip every family", "[models]") {
  test::TempDir dir("model");
  const auto d = blobs(20, 3, 4, 3.0, 17);
  std::vector<std::vector<int>> sets;
  for (int c : d.y) sets.push_back({c});
  Matrix nonneg = d.X.cwiseAbs();
  MlpOptions mopt;
  mopt.hidden = 6;
  mopt.epochs = 5;
  const std::vector<ModelFactory> bases{logreg_factory(), [&](const Matrix& X, std::span<const int> y, int C,
                                                                std::span<const double> w) {
                                          return std::make_unique<MlpModel>(fit_mlp(X, y, C, mopt, w));
                                        }};
  std::vector<std::pair<std::shared_ptr<const Classifier>, const Matrix*>> models{
      {std::make_shared<LinearModel>(fit_logreg(d.X, d.y, 3)), &d.X},
      {std::make_shared<CnbModel>(fit_cnb(nonneg, d.y, 3)), &nonneg},
      {std::make_shared<MlpModel>(fit_mlp(d.X, d.y, 3, mopt)), &d.X},
      {std::make_shared<OvrModel>(fit_ovr(d.X, sets, 4)), &d.X},
      {std::make_shared<StackedModel>(fit_stack(bases, d.X, d.y, 3, {3, 1})), &d.X}};
  for (const auto& [model, X] : models) {
    ModelFile file{"M1", {"a", "b", "c", "d"}, "abc123", {{"seed", 4}}, model};
    file.classes.resize(static_cast<std::size_t>(model->num_classes()));
    const auto path = dir / (model->kind() + ".model");
    save_model(path, file);
    const auto back = load_model(path);
    CHECK(back.variant == "M1");
    CHECK(back.classes == file.classes);
    CHECK(back.manifest_sha256 == "abc123");
    CHECK(back.model->kind() == model->kind());
    const Matrix a = model->predict_proba(*X);
    const Matrix b = back.model->predict_proba(*X);
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    CHECK(std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0);
  }

  const auto bytes = read_file(dir / "logreg.model");
  atomic_write_bytes(dir / "short.model", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_model(dir / "short.model"), ValidationError);
  atomic_write_bytes(dir / "junk.model", "{\"format\": \"other\"}\n");
  CHECK_THROWS_AS(load_model(dir / "junk.model"), ValidationError);
  const std::vector<double> values{1.0, -0.0, 1e-310, 3.5};
  CHECK(decode_params(encode_params(values)) == values);
}
