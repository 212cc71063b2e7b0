#include "embercall/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "embercall/models/cnb.hpp"
#include "embercall/models/linear.hpp"
#include "embercall/models/mlp.hpp"
#include "embercall/models/ovr.hpp"
#include "embercall/models/stack.hpp"

namespace embercall {

using models::Matrix;
using Json = nlohmann::json;

ModelKind parse_model_kind(std::string_view s) {
  if (s == "logreg") return ModelKind::Logreg;
  if (s == "cnb") return ModelKind::Cnb;
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "ovr") return ModelKind::Ovr;
  if (s == "stack") return ModelKind::Stack;
  throw ValidationError("unknown model '" + std::string(s) + "' (expected logreg, cnb, mlp, ovr or stack)");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Logreg:
      return "logreg";
    case ModelKind::Cnb:
      return "cnb";
    case ModelKind::Mlp:
      return "mlp";
    case ModelKind::Ovr:
      return "ovr";
    case ModelKind::Stack:
      return "stack";
  }
  return {};
}

void check_compatible(ModelKind model, Variant variant) {
  if (model == ModelKind::Cnb && variant != Variant::LogitSoftmax)
    throw ValidationError("complement NB requires nonnegative features: use --variant logit_softmax (got " +
                          to_string(variant) + ")");
}

std::set<std::string> validation_tracks(const std::map<std::string, std::string>& primary_by_track, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValidationError("validation fraction must be in [0, 1)");
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> groups;  // label -> (hash, stem)
  for (const auto& [stem, primary] : primary_by_track)
    groups[primary].emplace_back(sha256_hex(std::to_string(seed) + ":" + stem), stem);
  std::set<std::string> held;
  if (fraction == 0.0) return held;
  for (auto& [label, tracks] : groups) {
    if (tracks.size() < 2) continue;
    std::sort(tracks.begin(), tracks.end());
    auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(tracks.size())));
    n = std::clamp<std::size_t>(n, 1, tracks.size() - 1);
    for (std::size_t i = 0; i < n; ++i) held.insert(tracks[i].second);
  }
  return held;
}

LabelingConfig LabelingConfig::from_manifest(const DatasetManifest& manifest) {
  LabelingConfig c;
  const auto& j = manifest.config;
  if (j.contains("selector")) c.selector = parse_selector(j["selector"].get<std::string>());
  if (j.contains("policy")) c.policy.kind = parse_policy(j["policy"].get<std::string>());
  if (j.contains("threshold")) c.policy.threshold = j["threshold"].get<double>();
  return c;
}

namespace {

TrackMetadata metadata_or_rows(const Dataset& ds) {
  if (ds.metadata.size() > 0) return ds.metadata;
  TrackMetadata md;
  for (const auto& r : ds.rows) {
    const auto stem = parent_stem(r.track_stem);
    if (!md.contains(stem)) md.add(stem, {r.species, {}});
  }
  return md;
}

}  // namespace

LabeledRows label_dataset(const Dataset& dataset, const LabelingConfig& config) {
  config.policy.validate();
  const TrackMetadata md = metadata_or_rows(dataset);
  LabeledRows out;
  for (std::size_t i : select_channel(dataset.rows, config.selector, config.policy.threshold)) {
    out.rows.push_back(&dataset.rows[i]);
    out.labels.push_back(assign_labels(dataset.rows[i], config.policy, md));
  }
  return out;
}

models::Metrics evaluate_sets(const Matrix& P, std::span<const std::vector<int>> label_sets) {
  const auto pred = models::argmax_rows(P);
  std::vector<int> truth(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& set = label_sets[i];
    if (set.empty()) throw ValidationError("evaluate: empty label set");
    truth[i] = std::find(set.begin(), set.end(), pred[i]) != set.end() ? pred[i] : set.front();
  }
  return models::evaluate(truth, pred);
}

std::unique_ptr<models::Classifier> fit_model(ModelKind kind, const Matrix& X, std::span<const std::vector<int>> label_sets,
                                              std::span<const double> weights, int num_classes, const Hyperparameters& hyper,
                                              std::uint64_t seed) {
  if (label_sets.size() != static_cast<std::size_t>(X.rows()) || weights.size() != label_sets.size())
    throw ValidationError("fit: features, labels and weights differ in length");
  const models::LogregOptions logreg{hyper.l2};
  if (kind == ModelKind::Ovr) return std::make_unique<models::OvrModel>(models::fit_ovr(X, label_sets, num_classes, logreg, weights));

  std::size_t expanded = 0;
  for (const auto& s : label_sets) expanded += s.size();
  Matrix Xe(static_cast<Eigen::Index>(expanded), X.cols());
  std::vector<int> y;
  std::vector<double> w;
  for (std::size_t i = 0; i < label_sets.size(); ++i)
    for (int label : label_sets[i]) {
      Xe.row(static_cast<Eigen::Index>(y.size())) = X.row(static_cast<Eigen::Index>(i));
      y.push_back(label);
      w.push_back(weights[i]);
    }

  const models::MlpOptions mlp{hyper.hidden, hyper.lr, hyper.epochs, 32, seed};
  switch (kind) {
    case ModelKind::Logreg:
      return std::make_unique<models::LinearModel>(models::fit_logreg(Xe, y, num_classes, w, logreg));
    case ModelKind::Cnb:
      return std::make_unique<models::CnbModel>(models::fit_cnb(Xe, y, num_classes, hyper.alpha, w));
    case ModelKind::Mlp:
      return std::make_unique<models::MlpModel>(models::fit_mlp(Xe, y, num_classes, mlp, w));
    case ModelKind::Stack: {
      const bool nonnegative = (Xe.array() >= 0.0).all();
      std::vector<models::ModelFactory> bases;
      bases.push_back([logreg](const Matrix& A, std::span<const int> b, int C, std::span<const double> wt) {
        return std::make_unique<models::LinearModel>(models::fit_logreg(A, b, C, wt, logreg));
      });
      if (nonnegative)
        bases.push_back([alpha = hyper.alpha](const Matrix& A, std::span<const int> b, int C, std::span<const double> wt) {
          return std::make_unique<models::CnbModel>(models::fit_cnb(A, b, C, alpha, wt));
        });
      else
        bases.push_back([mlp](const Matrix& A, std::span<const int> b, int C, std::span<const double> wt) {
          return std::make_unique<models::MlpModel>(models::fit_mlp(A, b, C, mlp, wt));
        });
      const models::StackOptions opts{std::max(2, hyper.folds), seed, logreg};
      return std::make_unique<models::StackedModel>(models::fit_stack(bases, Xe, y, num_classes, opts, w));
    }
    case ModelKind::Ovr:
      break;
  }
  throw ValidationError("fit: unsupported model");
}

namespace {

struct Split {
  Matrix X;
  std::vector<std::vector<int>> labels;
  std::vector<double> weights;
  std::vector<std::string> groups;
};

std::vector<models::ParamRange> search_ranges(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnb:
      return {{"alpha", 1e-3, 10.0, true, false}};
    case ModelKind::Mlp:
      return {{"lr", 1e-3, 0.3, true, false}, {"hidden", 8, 128, false, true}};
    default:
      return {{"l2", 1e-5, 1.0, true, false}};
  }
}

Hyperparameters with_params(Hyperparameters h, const models::Params& p) {
  if (auto it = p.find("l2"); it != p.end()) h.l2 = it->second;
  if (auto it = p.find("alpha"); it != p.end()) h.alpha = it->second;
  if (auto it = p.find("lr"); it != p.end()) h.lr = it->second;
  if (auto it = p.find("hidden"); it != p.end()) h.hidden = static_cast<int>(it->second);
  return h;
}

Split subset(const Split& s, const std::vector<int>& fold, int f, bool keep) {
  Split out;
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == f) == keep) idx.push_back(static_cast<Eigen::Index>(i));
  out.X.resize(static_cast<Eigen::Index>(idx.size()), s.X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = s.X.row(idx[r]);
    out.labels.push_back(s.labels[static_cast<std::size_t>(idx[r])]);
    out.weights.push_back(s.weights[static_cast<std::size_t>(idx[r])]);
    out.groups.push_back(s.groups[static_cast<std::size_t>(idx[r])]);
  }
  return out;
}

}  // namespace

Json TrainResult::report() const {
  Json j = {{"kind", model.model ? model.model->kind() : ""},
            {"variant", model.variant},
            {"classes", model.classes},
            {"train_rows", train_rows},
            {"validation_rows", validation_rows},
            {"validation_tracks", validation_tracks},
            {"training", training.to_json(model.classes)},
            {"hyperparameters",
             {{"l2", chosen.l2}, {"alpha", chosen.alpha}, {"hidden", chosen.hidden}, {"lr", chosen.lr}, {"epochs", chosen.epochs}}},
            {"warnings", warnings}};
  j["validation"] = validation ? validation->to_json(model.classes) : Json(nullptr);
  if (search) {
    j["search"] = {{"best_trial", search->best_trial}, {"best_score", search->best_score}, {"best", Json(search->best)}};
  }
  return j;
}

TrainResult train_model(const Dataset& dataset, const TrainOptions& options) {
  check_compatible(options.model, options.variant);
  LabelingConfig labeling = LabelingConfig::from_manifest(dataset.manifest);
  if (options.selector) labeling.selector = *options.selector;
  if (options.policy) labeling.policy = *options.policy;
  const LabeledRows labeled = label_dataset(dataset, labeling);
  if (labeled.rows.empty()) throw ValidationError("train: dataset has no rows");

  std::map<std::string, std::string> primary_by_track;
  const TrackMetadata md = metadata_or_rows(dataset);
  for (const auto* r : labeled.rows) {
    const auto stem = parent_stem(r->track_stem);
    primary_by_track[stem] = md.contains(stem) ? md.lookup(stem).primary : r->species;
  }
  const auto held = validation_tracks(primary_by_track, options.validation_fraction, options.seed);

  std::vector<const EmbeddingRow*> train_rows, val_rows;
  std::vector<std::vector<std::string>> train_labels, val_labels;
  for (std::size_t i = 0; i < labeled.rows.size(); ++i) {
    const bool is_val = held.count(parent_stem(labeled.rows[i]->track_stem)) > 0;
    (is_val ? val_rows : train_rows).push_back(labeled.rows[i]);
    (is_val ? val_labels : train_labels).push_back(labeled.labels[i]);
  }
  const FeatureSet train_set = assemble_features(train_rows, train_labels, options.variant);
  const FeatureSet val_set = assemble_features(val_rows, val_labels, options.variant);
  if (train_set.features.empty()) throw ValidationError("train: no training features after the split");

  TrainResult result;
  for (const auto* set : {&train_set, &val_set})
    if (set->stats.missing_next > 0)
      result.warnings.push_back(std::to_string(set->stats.missing_next) + " row(s) skipped for " + to_string(options.variant) +
                                ": no next token in the same track/channel");

  std::set<std::string> observed;
  for (const auto& f : train_set.features) observed.insert(f.labels.begin(), f.labels.end());
  const bool has_nocall = observed.erase(kNoCall) > 0;
  std::vector<std::string> classes(observed.begin(), observed.end());
  if (has_nocall) classes.push_back(kNoCall);
  if (classes.size() < 2) throw ValidationError("train: training data has a single class (" + classes.front() + ")");
  std::map<std::string, int> index_of;
  for (std::size_t c = 0; c < classes.size(); ++c) index_of[classes[c]] = static_cast<int>(c);

  auto to_split = [&](const FeatureSet& set) {
    Split s;
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < set.features.size(); ++i) {
      const auto& f = set.features[i];
      values.push_back(f.values);
      std::vector<int> ids;
      for (const auto& l : f.labels) {
        // Labels never seen in training get fresh ids, so they count as misses.
        auto [it, inserted] = index_of.try_emplace(l, static_cast<int>(index_of.size()));
        ids.push_back(it->second);
      }
      s.labels.push_back(std::move(ids));
      s.weights.push_back(f.weight);
      s.groups.push_back(set.groups[i]);
    }
    s.X = models::to_matrix(values);
    return s;
  };
  const Split train = to_split(train_set);
  const Split val = val_set.features.empty() ? Split{} : to_split(val_set);
  const int C = static_cast<int>(classes.size());

  Hyperparameters hyper = options.hyper;
  if (options.search_budget > 0) {
    std::set<std::string> distinct(train.groups.begin(), train.groups.end());
    const int folds = std::min<int>(std::max(2, hyper.folds), static_cast<int>(distinct.size()));
    if (folds < 2) throw ValidationError("search: need at least two training tracks for k-fold");
    const auto fold = models::group_kfold(train.groups, folds, options.seed);
    models::SearchSpec spec{search_ranges(options.model), options.search_budget, options.seed, folds, "macro_precision"};
    result.search = models::random_search(spec, [&](const models::Params& p, int f) {
      const Split fit_part = subset(train, fold, f, false);
      const Split eval_part = subset(train, fold, f, true);
      const auto m = fit_model(options.model, fit_part.X, fit_part.labels, fit_part.weights, C, with_params(hyper, p), options.seed);
      return evaluate_sets(m->predict_proba(eval_part.X), eval_part.labels).macro_precision;
    });
    hyper = with_params(hyper, result.search->best);
  }
  result.chosen = hyper;

  std::shared_ptr<const models::Classifier> model =
      fit_model(options.model, train.X, train.labels, train.weights, C, hyper, options.seed);
  if (const auto* stack = dynamic_cast<const models::StackedModel*>(model.get()))
    result.warnings.insert(result.warnings.end(), stack->warnings.begin(), stack->warnings.end());
  if (const auto* ovr = dynamic_cast<const models::OvrModel*>(model.get()); ovr && !ovr->skipped.empty()) {
    std::string msg = "ovr: skipped classes without positives:";
    for (int c : ovr->skipped) msg += " " + classes[static_cast<std::size_t>(c)];
    result.warnings.push_back(msg);
  }
  result.training = evaluate_sets(model->predict_proba(train.X), train.labels);
  if (!val.labels.empty()) result.validation = evaluate_sets(model->predict_proba(val.X), val.labels);
  result.train_rows = static_cast<std::size_t>(train.X.rows());
  result.validation_rows = val.labels.size();
  result.validation_tracks.assign(held.begin(), held.end());

  result.model.variant = to_string(options.variant);
  result.model.classes = classes;
  const fs::path manifest_path = dataset.dir / kManifestFile;
  result.model.manifest_sha256 = fs::exists(manifest_path) ? sha256_file(manifest_path) : "";
  result.model.training = {{"model", to_string(options.model)},
                           {"selector", to_string(labeling.selector)},
                           {"policy", to_string(labeling.policy.kind)},
                           {"threshold", labeling.policy.threshold},
                           {"seed", options.seed},
                           {"validation_fraction", options.validation_fraction},
                           {"search_budget", options.search_budget},
                           {"dataset_version", dataset.manifest.version}};
  result.model.model = std::move(model);
  return result;
}

std::string NoCallReport::text() const {
  std::ostringstream out;
  out << "rows: " << data.rows.size() << " (train " << train_rows << ", held-out " << test_rows << ")\n";
  out << "balance: " << data.balance_report() << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", accuracy);
  out << "held-out accuracy: " << buf << "\n";
  out << prediction_line << "\n";
  return out.str();
}

NoCallReport nocall_report(const Dataset& dataset, double threshold, int top_n, std::uint64_t seed,
                           double validation_fraction, double l2) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("nocall-report: threshold must be in [0, 1]");
  if (top_n < 0) throw ValidationError("nocall-report: top-n must be >= 0");
  NoCallReport report;
  report.data = build_nocall_dataset(dataset.rows, threshold, top_n);
  if (report.data.rows.empty()) throw ValidationError("nocall-report: no rows");
  if (report.data.positive_fraction == 0.0 || report.data.positive_fraction == 1.0)
    throw ValidationError("nocall-report: single-class dataset (" + report.data.balance_report() + ")");

  std::map<std::string, std::string> primary_by_track;
  for (std::size_t i : report.data.rows)
    primary_by_track.emplace(parent_stem(dataset.rows[i].track_stem), dataset.rows[i].species);
  const auto held = validation_tracks(primary_by_track, validation_fraction, seed);

  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t k = 0; k < report.data.rows.size(); ++k) {
    const auto& row = dataset.rows[report.data.rows[k]];
    const bool test = held.count(parent_stem(row.track_stem)) > 0;
    (test ? test_x : train_x).emplace_back(row.embedding.begin(), row.embedding.end());
    (test ? test_y : train_y).push_back(report.data.is_call[k]);
  }
  if (test_x.empty()) throw ValidationError("nocall-report: no held-out tracks (need at least two tracks per species)");
  const auto model = models::fit_logreg(models::to_matrix(train_x), train_y, 2, {}, models::LogregOptions{l2});
  const auto pred = models::argmax_rows(model.predict_proba(models::to_matrix(test_x)));
  report.accuracy = models::evaluate(test_y, pred).accuracy;
  report.train_rows = train_x.size();
  report.test_rows = test_x.size();
  report.prediction_line = models::nocall_prediction_report(pred);
  return report;
}

}  // namespace embercall
