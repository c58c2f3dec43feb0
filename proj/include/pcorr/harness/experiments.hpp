#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/rng.hpp"
#include "pcorr/engine/session.hpp"
#include "pcorr/harness/dataset.hpp"
#include "pcorr/harness/metric_table.hpp"
#include "pcorr/harness/models.hpp"
#include "pcorr/metrics/context.hpp"
#include "pcorr/metrics/contrast.hpp"
#include "pcorr/metrics/saliency.hpp"
#include "pcorr/stats/eval.hpp"
#include "pcorr/stats/logistic.hpp"

namespace pcorr::harness {

using nlohmann::json;

/// Tap label used for the mean over taps.
inline constexpr const char* kAggregateTap = "aggregate";

inline std::vector<engine::LayerTap> select_taps(const engine::NetworkGraph& g, const std::vector<std::string>& names) {
  return names.empty() ? g.taps() : g.resolve_taps(names);
}

inline json to_json(const stats::PredictionEval& e) {
  return {{"r2", e.r2},       {"srocc", e.srocc},         {"rmse", e.rmse},
          {"n", e.n},         {"logistic", e.logistic},   {"degenerate", e.degenerate},
          {"slope", e.fit.slope}, {"intercept", e.fit.intercept}};
}

// ---------------------------------------------------------------- saliency

struct SaliencyExperimentOptions {
  metrics::SaliencyOptions metric;
  std::vector<std::string> taps;  ///< empty: the model's default taps
  stats::LogisticMode logistic = stats::LogisticMode::identity;
  int residual_count = 5;         ///< images listed per band and direction
  std::uint64_t seed = 0;
};

struct ResidualEntry {
  std::string id;
  double threshold_db = 0.0;
  double predicted_db = 0.0;
  double residual_db = 0.0;  ///< measured - predicted
};

/// Thresholds split into equal-count tertiles; each band lists the largest
/// positive residuals (measured above the line: the image masks better than
/// the model predicts) and the largest negative ones.
struct ResidualBand {
  std::string name;
  double low = 0.0, high = 0.0;
  std::vector<ResidualEntry> above;
  std::vector<ResidualEntry> below;
};

struct SaliencyEvaluation {
  stats::PredictionEval aggregate;
  std::vector<std::string> taps;
  std::vector<stats::PredictionEval> per_tap;
  std::vector<ResidualBand> residuals;
  bool logistic_failed = false;
};

struct SaliencyReport {
  MetricTable table;
  SaliencyEvaluation eval;
  std::size_t images = 0;
  std::vector<std::string> missing;
};

namespace detail {

inline stats::PredictionEval evaluate_predictor(std::vector<double> predictor, const std::vector<double>& target,
                                                stats::LogisticMode mode, bool& failed) {
  bool applied = false;
  if (mode != stats::LogisticMode::identity) {
    const auto lin = stats::logistic_linearize(predictor, mode, {}, target);
    failed = failed || lin.fit_failed;
    applied = lin.applied;
    predictor = lin.values;
  }
  auto e = stats::linfit_eval(predictor, target);
  e.logistic = applied;
  return e;
}

inline std::vector<ResidualBand> residual_bands(const std::vector<std::string>& ids, const std::vector<double>& x,
                                                const std::vector<double>& y, const stats::LinearFit& fit, int count) {
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  const char* names[3] = {"low", "middle", "high"};
  std::vector<ResidualBand> out;
  for (int b = 0; b < 3; ++b) {
    const std::size_t lo = n * b / 3, hi = n * (b + 1) / 3;
    if (lo == hi) continue;
    ResidualBand band;
    band.name = names[b];
    band.low = y[order[lo]];
    band.high = y[order[hi - 1]];
    std::vector<ResidualEntry> entries;
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = order[k];
      const double pred = fit.slope * x[i] + fit.intercept;
      entries.push_back({ids[i], y[i], pred, y[i] - pred});
    }
    std::ranges::stable_sort(entries, [](const auto& a, const auto& b) { return a.residual_db > b.residual_db; });
    for (const auto& e : entries)
      if (e.residual_db > 0 && static_cast<int>(band.above.size()) < count) band.above.push_back(e);
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
      if (it->residual_db < 0 && static_cast<int>(band.below.size()) < count) band.below.push_back(*it);
    out.push_back(std::move(band));
  }
  return out;
}

}  // namespace detail

/// Evaluates the per-image rows of a saliency table against the dataset
/// thresholds. Only rows with an empty level column are used (the per-tap
/// and aggregate means), so a re-read CSV gives identical numbers.
inline SaliencyEvaluation evaluate_saliency_rows(const std::vector<MetricRow>& rows,
                                                 const MaskingDatasetManifest& manifest,
                                                 stats::LogisticMode mode = stats::LogisticMode::identity,
                                                 int residual_count = 5) {
  std::map<std::string, double> thresholds;
  for (const auto& r : manifest.records) thresholds[r.id] = r.threshold_db;
  std::vector<std::string> taps;
  std::map<std::string, std::map<std::string, double>> by_tap;  // tap -> id -> value
  for (const auto& r : rows) {
    if (r.experiment != "saliency" || !std::isnan(r.level_or_contrast)) continue;
    if (!thresholds.contains(r.config_id)) continue;
    if (r.tap != kAggregateTap && std::ranges::find(taps, r.tap) == taps.end()) taps.push_back(r.tap);
    by_tap[r.tap][r.config_id] = r.value;
  }
  const auto& agg = by_tap[kAggregateTap];
  if (agg.size() < 3) throw ValidationError("saliency evaluation needs at least 3 images with thresholds");
  std::vector<std::string> ids;
  std::vector<double> x, y;
  for (const auto& [id, v] : agg) {
    ids.push_back(id);
    x.push_back(v);
    y.push_back(thresholds.at(id));
  }
  SaliencyEvaluation ev;
  ev.aggregate = detail::evaluate_predictor(x, y, mode, ev.logistic_failed);
  ev.residuals = detail::residual_bands(ids, x, y, stats::ols(x, y), residual_count);
  for (const auto& tap : taps) {
    std::vector<double> tx, ty;
    for (const auto& id : ids) {
      const auto it = by_tap[tap].find(id);
      if (it == by_tap[tap].end()) throw ValidationError("tap " + tap + " has no value for image " + id);
      tx.push_back(it->second);
      ty.push_back(thresholds.at(id));
    }
    ev.taps.push_back(tap);
    ev.per_tap.push_back(detail::evaluate_predictor(tx, ty, mode, ev.logistic_failed));
  }
  return ev;
}

inline json to_json(const SaliencyEvaluation& ev) {
  json taps = json::array();
  for (std::size_t i = 0; i < ev.taps.size(); ++i) {
    auto j = to_json(ev.per_tap[i]);
    j["tap"] = ev.taps[i];
    taps.push_back(std::move(j));
  }
  json bands = json::array();
  for (const auto& b : ev.residuals) {
    auto list = [](const std::vector<ResidualEntry>& v) {
      json a = json::array();
      for (const auto& e : v)
        a.push_back({{"id", e.id}, {"threshold_db", e.threshold_db}, {"predicted_db", e.predicted_db},
                     {"residual_db", e.residual_db}});
      return a;
    };
    bands.push_back({{"band", b.name}, {"threshold_low", b.low}, {"threshold_high", b.high},
                     {"above_prediction", list(b.above)}, {"below_prediction", list(b.below)}});
  }
  return {{"aggregate", to_json(ev.aggregate)}, {"per_tap", taps}, {"residuals", bands},
          {"logistic_failed", ev.logistic_failed}};
}

inline SaliencyReport run_saliency_experiment(const MaskingDatasetManifest& manifest, const LoadedModel& model,
                                              const SaliencyExperimentOptions& opt) {
  const engine::InferenceSession session(model.graph);
  const auto taps = select_taps(model.graph, opt.taps);
  const auto& in = model.graph.input;
  SaliencyReport rep;
  rep.missing = manifest.missing;
  rep.table.experiment = "saliency";
  rep.table.model = model.id;
  rep.table.config = {{"experiment", "saliency"},
                      {"model", model.id},
                      {"dataset", manifest.directory.filename().string()},
                      {"records", manifest.records.size()},
                      {"scale", std::string(to_string(manifest.scale))},
                      {"fill", manifest.fill},
                      {"levels_db", opt.metric.levels_db},
                      {"repetitions", opt.metric.repetitions},
                      {"order", std::string(metrics::to_string(opt.metric.order))},
                      {"noise_law", std::string(stimuli::to_string(opt.metric.law))},
                      {"taps", [&] {
                         json a = json::array();
                         for (const auto& t : taps) a.push_back(t.node);
                         return a;
                       }()},
                      {"seed", opt.seed},
                      {"format_version", kTableFormatVersion}};
  const std::string order(metrics::to_string(opt.metric.order));
  for (const auto& r : manifest.records) {
    if (std::ranges::find(manifest.missing, r.id) != manifest.missing.end()) continue;
    const auto prepared = prepare_record(manifest, r, in.w, in.h, in.c);
    auto mo = opt.metric;
    mo.region = prepared.region;
    const auto s = metrics::saliency_l1(session, prepared.image, taps, mo, derive_seed(opt.seed, r.id));
    for (std::size_t t = 0; t < taps.size(); ++t) {
      for (std::size_t li = 0; li < s.levels_db.size(); ++li)
        rep.table.rows.push_back({"saliency", model.id, r.id, taps[t].stage, order, s.levels_db[li], kNone,
                                  s.per_level[li][t], opt.seed});
      rep.table.rows.push_back({"saliency", model.id, r.id, taps[t].stage, order, kNone, kNone, s.per_tap[t], opt.seed});
    }
    rep.table.rows.push_back({"saliency", model.id, r.id, kAggregateTap, order, kNone, kNone, s.aggregate, opt.seed});
    ++rep.images;
  }
  rep.eval = evaluate_saliency_rows(rep.table.rows, manifest, opt.logistic, opt.residual_count);
  return rep;
}

inline json to_json(const SaliencyReport& r) {
  return {{"experiment", "saliency"},     {"model", r.table.model},
          {"config_hash", r.table.config_hash()}, {"format_version", kTableFormatVersion},
          {"images", r.images},           {"missing", r.missing},
          {"missing_count", r.missing.size()},    {"evaluation", to_json(r.eval)}};
}

// ----------------------------------------------------------------- context

struct ContextExperimentOptions {
  metrics::ContextOptions metric;
  std::vector<std::string> taps;
  std::vector<std::string> config_ids;  ///< empty: all configs of the paradigm
  std::optional<std::filesystem::path> human_csv;  ///< shape only: layout,human_score
  std::uint64_t seed = 0;
};

struct ContextConfigResult {
  std::string config_id;
  metrics::Verdict verdict = metrics::Verdict::tie;
  double easy = 0.0, hard = 0.0;  ///< aggregate MI, bits
};

struct ContextReport {
  MetricTable table;
  stimuli::Paradigm paradigm = stimuli::Paradigm::segmentation;
  std::vector<ContextConfigResult> configs;
  int consistent = 0, inconsistent = 0, ties = 0;
  std::optional<stats::Correlation> human_srocc;  ///< shape + human CSV
  std::size_t human_pairs = 0;
};

/// Reads `layout,human_score`: one row per shape layout index.
inline std::map<int, double> read_human_layout_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  std::map<int, double> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (out.empty() && line == "layout,human_score") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 2) throw ValidationError(where + ": expected layout,human_score");
    out[detail::parse_int(f[0], where)] = detail::parse_number(f[1], where);
  }
  return out;
}

inline ContextReport run_context_experiment(stimuli::Paradigm paradigm, const LoadedModel& model,
                                            const ContextExperimentOptions& opt) {
  const engine::InferenceSession session(model.graph);
  const auto taps = select_taps(model.graph, opt.taps);
  auto configs = stimuli::enumerate_configs(paradigm);
  if (!opt.config_ids.empty()) {
    std::vector<stimuli::PatternConfig> chosen;
    for (const auto& id : opt.config_ids) {
      const auto it = std::ranges::find_if(configs, [&](const auto& c) { return c.id() == id; });
      if (it == configs.end()) throw ValidationError("unknown config id '" + id + "'");
      chosen.push_back(*it);
    }
    configs = std::move(chosen);
  }
  ContextReport rep;
  rep.paradigm = paradigm;
  rep.table.experiment = "context";
  rep.table.model = model.id;
  const int cats = stimuli::category_count(paradigm);
  json tapnames = json::array();
  for (const auto& t : taps) tapnames.push_back(t.node);
  json ids = json::array();
  for (const auto& c : configs) ids.push_back(c.id());
  rep.table.config = {{"experiment", "context"},
                      {"model", model.id},
                      {"paradigm", std::string(stimuli::to_string(paradigm))},
                      {"configs", ids},
                      {"samples_per_category", opt.metric.resolved_samples(cats)},
                      {"bins", opt.metric.bins},
                      {"taps", tapnames},
                      {"seed", opt.seed},
                      {"format_version", kTableFormatVersion}};

  std::map<int, std::vector<double>> hard_by_layout;
  for (const auto& cfg : configs) {
    const auto r = metrics::context_experiment(session, taps, cfg, opt.seed, opt.metric);
    const std::string id = cfg.id();
    for (std::size_t t = 0; t < taps.size(); ++t) {
      rep.table.rows.push_back({"context", model.id, id, taps[t].stage, "easy", kNone, kNone, r.easy.per_tap[t], opt.seed});
      rep.table.rows.push_back({"context", model.id, id, taps[t].stage, "hard", kNone, kNone, r.hard.per_tap[t], opt.seed});
    }
    rep.table.rows.push_back({"context", model.id, id, kAggregateTap, "easy", kNone, kNone, r.easy.aggregate, opt.seed});
    rep.table.rows.push_back({"context", model.id, id, kAggregateTap, "hard", kNone, kNone, r.hard.aggregate, opt.seed});
    rep.configs.push_back({id, r.verdict, r.easy.aggregate, r.hard.aggregate});
    switch (r.verdict) {
      case metrics::Verdict::consistent: ++rep.consistent; break;
      case metrics::Verdict::inconsistent: ++rep.inconsistent; break;
      case metrics::Verdict::tie: ++rep.ties; break;
    }
    hard_by_layout[cfg.location_index].push_back(r.hard.aggregate);
  }
  if (opt.human_csv) {
    if (paradigm != stimuli::Paradigm::shape) throw ValidationError("human difficulty CSV applies to the shape paradigm");
    const auto human = read_human_layout_scores(*opt.human_csv);
    std::vector<double> model_score, human_score;
    for (const auto& [layout, values] : hard_by_layout) {
      const auto it = human.find(layout);
      if (it == human.end()) continue;
      model_score.push_back(mean_of(values));
      human_score.push_back(it->second);
    }
    rep.human_pairs = model_score.size();
    if (rep.human_pairs < 3) throw ValidationError("human comparison needs at least 3 matching layouts");
    rep.human_srocc = stats::srocc(model_score, human_score);
  }
  return rep;
}

inline json to_json(const ContextReport& r) {
  json configs = json::array();
  for (const auto& c : r.configs)
    configs.push_back({{"config_id", c.config_id}, {"verdict", std::string(metrics::to_string(c.verdict))},
                       {"mi_easy", c.easy}, {"mi_hard", c.hard}});
  json out = {{"experiment", "context"},
              {"model", r.table.model},
              {"paradigm", std::string(stimuli::to_string(r.paradigm))},
              {"config_hash", r.table.config_hash()},
              {"format_version", kTableFormatVersion},
              {"counts", {{"consistent", r.consistent}, {"inconsistent", r.inconsistent}, {"tie", r.ties},
                          {"total", r.configs.size()}}},
              {"configs", configs}};
  if (r.human_srocc)
    out["human"] = {{"srocc", r.human_srocc->value}, {"degenerate", r.human_srocc->degenerate},
                    {"layouts", r.human_pairs}, {"model_score", "mean hard-condition MI per layout"}};
  return out;
}

// ---------------------------------------------------------------- contrast

struct ContrastExperimentOptions {
  metrics::ContrastOptions metric;
  std::vector<std::string> taps;
  /// Iso-output targets as fractions of each tap's largest tabulated response.
  std::vector<double> iso_fractions = {0.1, 0.25, 0.5};
  std::optional<std::filesystem::path> human_csv;  ///< frequency,contrast
  std::string align_tap;                           ///< empty: last selected tap
  double align_fraction = 0.1;                     ///< iso level used for alignment
  std::uint64_t seed = 0;
};

struct ContrastReport {
  MetricTable table;
  metrics::ContrastResponseTable response;
  std::vector<double> dropped_frequencies;  ///< at or above the Nyquist limit
  std::vector<metrics::LogLinearity> log_linearity;  ///< per tap; empty with fewer than 3 positive contrasts
  std::optional<metrics::FrequencyAlignment> alignment;
  std::string alignment_tap;
};

inline metrics::FrequencyCurve read_human_frequency_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  metrics::FrequencyCurve c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (c.frequencies.empty() && line == "frequency,contrast") continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    const auto f = detail::split_csv_line(line);
    if (f.size() != 2) throw ValidationError(where + ": expected frequency,contrast");
    c.frequencies.push_back(detail::parse_number(f[0], where));
    c.contrasts.push_back(detail::parse_number(f[1], where));
  }
  return c;
}

inline ContrastReport run_contrast_experiment(const LoadedModel& model, const ContrastExperimentOptions& opt) {
  const engine::InferenceSession session(model.graph);
  const auto taps = select_taps(model.graph, opt.taps);
  ContrastReport rep;
  auto mo = opt.metric;
  mo.frequencies.clear();
  const double nyquist = model.graph.input.w / 2.0;
  for (double f : opt.metric.frequencies) (f < nyquist ? mo.frequencies : rep.dropped_frequencies).push_back(f);
  if (mo.frequencies.empty()) throw ValidationError("every requested frequency is at or above the Nyquist limit");

  rep.table.experiment = "contrast";
  rep.table.model = model.id;
  json tapnames = json::array();
  for (const auto& t : taps) tapnames.push_back(t.node);
  rep.table.config = {{"experiment", "contrast"},
                      {"model", model.id},
                      {"contrasts", mo.contrasts},
                      {"frequencies", mo.frequencies},
                      {"dropped_frequencies", rep.dropped_frequencies},
                      {"repetitions", mo.repetitions},
                      {"order", std::string(metrics::to_string(mo.order))},
                      {"mean_level", mo.mean_level},
                      {"iso_fractions", opt.iso_fractions},
                      {"taps", tapnames},
                      {"seed", opt.seed},
                      {"format_version", kTableFormatVersion}};
  rep.response = metrics::contrast_response(session, taps, mo, opt.seed);
  const auto& R = rep.response;
  const std::string order(metrics::to_string(mo.order));
  const std::size_t nf = R.frequencies.size();
  const auto positive_contrasts = std::ranges::count_if(R.contrasts, [](double c) { return c > 0.0; });
  auto push = [&](const std::string& tap, const std::string& cond, double level, double freq, double v) {
    rep.table.rows.push_back({"contrast", model.id, "grating", tap, cond, level, freq, v, opt.seed});
  };
  for (std::size_t t = 0; t < taps.size(); ++t) {
    const std::string& tap = taps[t].stage;
    double peak = 0.0;
    for (std::size_t ci = 0; ci < R.contrasts.size(); ++ci)
      for (std::size_t fi = 0; fi < nf; ++fi) {
        push(tap, order, R.contrasts[ci], R.frequencies[fi], R.at(t, ci, fi));
        peak = std::max(peak, R.at(t, ci, fi));
      }
    for (double frac : opt.iso_fractions) {
      const auto iso = metrics::iso_output_invert(R, t, frac * peak);
      for (std::size_t fi = 0; fi < nf; ++fi)
        push(tap, "iso@" + format_double(frac), frac * peak, R.frequencies[fi], iso.contrasts[fi]);
    }
    if (positive_contrasts < 3) continue;  // log-linearity needs three points
    auto ll = metrics::log_linearity_r2(R, t);
    for (std::size_t fi = 0; fi < nf; ++fi) push(tap, "log-linearity", kNone, R.frequencies[fi], ll.r2[fi]);
    push(tap, "log-linearity", kNone, kNone, ll.mean_r2);
    rep.log_linearity.push_back(std::move(ll));
  }

  if (opt.human_csv) {
    const auto human = read_human_frequency_curve(*opt.human_csv);
    std::size_t t = taps.size() - 1;
    if (!opt.align_tap.empty()) {
      const auto it = std::ranges::find_if(taps, [&](const auto& x) { return x.node == opt.align_tap || x.stage == opt.align_tap; });
      if (it == taps.end()) throw ValidationError("alignment tap '" + opt.align_tap + "' is not selected");
      t = static_cast<std::size_t>(it - taps.begin());
    }
    double peak = 0.0;
    for (double v : R.values[t]) peak = std::max(peak, v);
    const auto iso = metrics::iso_output_invert(R, t, opt.align_fraction * peak);
    metrics::FrequencyCurve model_curve;
    for (std::size_t fi = 0; fi < nf; ++fi)
      if (iso.reachable[fi]) {
        model_curve.frequencies.push_back(iso.frequencies[fi]);
        model_curve.contrasts.push_back(iso.contrasts[fi]);
      }
    rep.alignment = metrics::align_frequency_scale(model_curve, human);
    rep.alignment_tap = taps[t].stage;
  }
  return rep;
}

inline json to_json(const ContrastReport& r) {
  json taps = json::array();
  for (std::size_t t = 0; t < r.response.taps.size(); ++t) {
    json j = {{"tap", r.response.taps[t].stage}};
    if (t < r.log_linearity.size()) {
      j["log_linearity_mean_r2"] = r.log_linearity[t].mean_r2;
      j["log_linearity_r2"] = r.log_linearity[t].r2;
    }
    taps.push_back(std::move(j));
  }
  json out = {{"experiment", "contrast"},
              {"model", r.table.model},
              {"config_hash", r.table.config_hash()},
              {"format_version", kTableFormatVersion},
              {"frequencies", r.response.frequencies},
              {"dropped_frequencies", r.dropped_frequencies},
              {"taps", taps}};
  if (r.alignment)
    out["alignment"] = {{"tap", r.alignment_tap}, {"scale", r.alignment->scale}, {"r2", r.alignment->r2},
                        {"pairs", r.alignment->pairs}, {"degenerate", r.alignment->degenerate}};
  return out;
}

}  // namespace pcorr::harness
