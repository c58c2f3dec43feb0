// Command-line front end. Exit codes: 0 success, 2 invalid input or
// arguments, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pcorr/core/error.hpp"
#include "pcorr/core/parallel.hpp"
#include "pcorr/engine/nwf.hpp"
#include "pcorr/harness/dataset.hpp"
#include "pcorr/harness/experiments.hpp"
#include "pcorr/harness/metric_table.hpp"
#include "pcorr/harness/models.hpp"
#include "pcorr/image_io.hpp"
#include "pcorr/stimuli/grating.hpp"
#include "pcorr/stimuli/patterns.hpp"

namespace fs = std::filesystem;
using namespace pcorr;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct ModelArgs {
  std::string source = "builtin:gabor";
  int input_size = 224;
  int channels = 1;
  long long scramble_seed = -1;

  void add(CLI::App* app) {
    app->add_option("--model", source, "builtin:gabor, builtin:gabor-desk, builtin:pyramid or an NWF file")
        ->capture_default_str();
    app->add_option("--input-size", input_size, "input side for built-in banks")->capture_default_str();
    app->add_option("--channels", channels, "input channels for built-in banks (1 or 3)")->capture_default_str();
    app->add_option("--scramble-seed", scramble_seed, "permute every weight tensor with this seed");
  }

  harness::LoadedModel load() const {
    harness::ModelSpec spec{source, input_size, channels, std::nullopt};
    if (scramble_seed >= 0) spec.scramble_seed = static_cast<std::uint64_t>(scramble_seed);
    return harness::load_model(spec);
  }
};

struct OutputArgs {
  std::string table;
  std::string report;

  void add(CLI::App* app) {
    app->add_option("--out", table, "metric table CSV (a .json sidecar is written next to it)")->required();
    app->add_option("--report", report, "report JSON (default: stdout)");
  }

  void emit(const harness::MetricTable& t, const json& rep) const {
    harness::save_table(t, table);
    if (report.empty()) {
      std::cout << rep.dump(2) << '\n';
    } else {
      std::ofstream f(report, std::ios::trunc);
      if (!f) throw Error("cannot write " + report);
      f << rep.dump(2) << '\n';
    }
  }
};

stats::LogisticMode parse_logistic(const std::string& s) {
  if (s == "identity") return stats::LogisticMode::identity;
  if (s == "fit") return stats::LogisticMode::fit;
  throw ValidationError("--logistic must be identity or fit");
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (c == '/') c = '_';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceptual correlates of layered vision models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<std::string> taps;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads (0: all cores)")->capture_default_str();
  app.add_option("--taps", taps, "tap node ids (default: the model's declared taps)")->delimiter(',');

  // gen-stimuli
  auto* gen = app.add_subcommand("gen-stimuli", "write pattern or grating stimuli as PNG files");
  std::string gen_kind = "pattern", gen_paradigm = "segmentation", gen_dir = "stimuli";
  std::vector<std::string> gen_configs;
  int gen_samples = 1, gen_size = 224;
  double g_freq = 12, g_contrast = 0.5, g_orient = 0, g_phase = 0, g_mean = 127.5;
  gen->add_option("--kind", gen_kind, "pattern or grating")->capture_default_str();
  gen->add_option("--paradigm", gen_paradigm, "segmentation, crowding or shape")->capture_default_str();
  gen->add_option("--configs", gen_configs, "config ids (default: all 90)")->delimiter(',');
  gen->add_option("--samples", gen_samples, "samples per category and condition")->capture_default_str();
  gen->add_option("--size", gen_size, "image side in pixels")->capture_default_str();
  gen->add_option("--out-dir", gen_dir, "output directory")->capture_default_str();
  gen->add_option("--frequency", g_freq, "grating cycles per image width")->capture_default_str();
  gen->add_option("--contrast", g_contrast, "grating Michelson contrast")->capture_default_str();
  gen->add_option("--orientation", g_orient, "grating orientation, radians")->capture_default_str();
  gen->add_option("--phase", g_phase, "grating phase, radians")->capture_default_str();
  gen->add_option("--mean", g_mean, "grating mean level")->capture_default_str();

  // ingest-dataset
  auto* ingest = app.add_subcommand("ingest-dataset", "validate a masking dataset directory");
  std::string ds_dir, ds_scale = "100";
  double ds_fill = 0.0;
  ingest->add_option("--dataset", ds_dir, "directory with thresholds.csv and images")->required();
  ingest->add_option("--scale", ds_scale, "50, 66 or 100")->capture_default_str();
  ingest->add_option("--fill", ds_fill, "canvas value outside the image")->capture_default_str();

  // run-saliency
  auto* sal = app.add_subcommand("run-saliency", "saliency correlate against masking thresholds");
  ModelArgs sal_model;
  OutputArgs sal_out;
  harness::SaliencyExperimentOptions sal_opt;
  std::string sal_dir, sal_scale = "100", sal_order = "mean-of-abs", sal_law = "random-phase",
              sal_logistic = "identity";
  double sal_fill = 0.0;
  sal_model.add(sal);
  sal_out.add(sal);
  sal->add_option("--dataset", sal_dir, "dataset directory")->required();
  sal->add_option("--scale", sal_scale, "50, 66 or 100")->capture_default_str();
  sal->add_option("--fill", sal_fill, "canvas value outside the image")->capture_default_str();
  sal->add_option("--levels", sal_opt.metric.levels_db, "noise levels in dB")->delimiter(',');
  sal->add_option("--repetitions", sal_opt.metric.repetitions, "noise draws per level")->capture_default_str();
  sal->add_option("--order", sal_order, "mean-of-abs or abs-of-mean")->capture_default_str();
  sal->add_option("--noise-law", sal_law, "random-phase or white-gaussian")->capture_default_str();
  sal->add_option("--logistic", sal_logistic, "identity or fit")->capture_default_str();
  sal->add_option("--residuals", sal_opt.residual_count, "images listed per band and direction")->capture_default_str();

  // run-context
  auto* ctx = app.add_subcommand("run-context", "mutual-information context experiment");
  ModelArgs ctx_model;
  OutputArgs ctx_out;
  harness::ContextExperimentOptions ctx_opt;
  std::string ctx_paradigm = "segmentation", ctx_human;
  ctx_model.add(ctx);
  ctx_out.add(ctx);
  ctx->add_option("--paradigm", ctx_paradigm, "segmentation, crowding or shape")->capture_default_str();
  ctx->add_option("--samples-per-category", ctx_opt.metric.samples_per_category,
                  "0: 500 split evenly over the categories")->capture_default_str();
  ctx->add_option("--bins", ctx_opt.metric.bins, "equal-count bins")->capture_default_str();
  ctx->add_option("--configs", ctx_opt.config_ids, "config ids (default: all 90)")->delimiter(',');
  ctx->add_option("--human-csv", ctx_human, "shape only: layout,human_score");

  // run-contrast
  auto* con = app.add_subcommand("run-contrast", "grating contrast-response experiment");
  ModelArgs con_model;
  OutputArgs con_out;
  harness::ContrastExperimentOptions con_opt;
  std::string con_order = "mean-of-abs", con_human;
  con_model.add(con);
  con_out.add(con);
  con->add_option("--contrasts", con_opt.metric.contrasts, "Michelson contrasts")->delimiter(',');
  con->add_option("--frequencies", con_opt.metric.frequencies, "cycles per image width")->delimiter(',');
  con->add_option("--repetitions", con_opt.metric.repetitions, "random orientation/phase draws")->capture_default_str();
  con->add_option("--order", con_order, "mean-of-abs or abs-of-mean")->capture_default_str();
  con->add_option("--iso-fractions", con_opt.iso_fractions, "iso-output targets, fractions of the tap maximum")
      ->delimiter(',');
  con->add_option("--human-csv", con_human, "frequency,contrast curve to align against");
  con->add_option("--align-tap", con_opt.align_tap, "tap used for alignment (default: last)");
  con->add_option("--align-fraction", con_opt.align_fraction, "iso level used for alignment")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a saliency metric table against thresholds");
  std::string ev_table, ev_dir, ev_logistic = "identity", ev_report;
  int ev_residuals = 5;
  ev->add_option("--table", ev_table, "metric table CSV from run-saliency")->required();
  ev->add_option("--dataset", ev_dir, "dataset directory")->required();
  ev->add_option("--logistic", ev_logistic, "identity or fit")->capture_default_str();
  ev->add_option("--residuals", ev_residuals, "images listed per band and direction")->capture_default_str();
  ev->add_option("--report", ev_report, "report JSON (default: stdout)");

  // export-bank
  auto* exp = app.add_subcommand("export-bank", "write a built-in filter bank as an NWF v1 file");
  ModelArgs exp_model;
  std::string exp_path;
  exp_model.add(exp);
  exp->add_option("--out", exp_path, "NWF output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (workers == 0) workers = default_workers();

    if (*gen) {
      fs::create_directories(gen_dir);
      if (gen_kind == "grating") {
        const auto img = stimuli::render_grating({g_contrast, g_freq, g_orient, g_phase, g_mean}, gen_size, gen_size);
        const auto path = fs::path(gen_dir) / ("grating_f" + harness::format_double(g_freq) + "_c" +
                                               harness::format_double(g_contrast) + ".png");
        io::write_image(path, img);
        std::cout << path.string() << '\n';
      } else if (gen_kind == "pattern") {
        const auto paradigm = stimuli::parse_paradigm(gen_paradigm);
        stimuli::RenderOptions ro;
        ro.width = ro.height = gen_size;
        int written = 0;
        for (const auto& cfg : stimuli::enumerate_configs(paradigm)) {
          if (!gen_configs.empty() && std::ranges::find(gen_configs, cfg.id()) == gen_configs.end()) continue;
          const auto cseed = derive_seed(seed, cfg.id());
          for (int c = 0; c < stimuli::category_count(paradigm); ++c)
            for (auto cond : {stimuli::Condition::easy, stimuli::Condition::hard})
              for (int k = 0; k < gen_samples; ++k) {
                const auto img = stimuli::render_pattern(cfg, {c, cond}, derive_seed(cseed, c, static_cast<std::uint64_t>(k)), ro);
                io::write_image(fs::path(gen_dir) / (file_safe(cfg.id()) + "_c" + std::to_string(c) + "_" +
                                                     std::string(stimuli::to_string(cond)) + "_" +
                                                     std::to_string(k) + ".png"),
                                img);
                ++written;
              }
        }
        if (written == 0) throw ValidationError("no config matched --configs");
        std::cout << written << " images written to " << gen_dir << '\n';
      } else {
        throw ValidationError("--kind must be pattern or grating");
      }
    } else if (*ingest) {
      const auto m = harness::ingest_masking_dataset(ds_dir, harness::parse_scale(ds_scale), ds_fill);
      json recs = json::array();
      for (const auto& r : m.records)
        recs.push_back({{"id", r.id}, {"file", r.file}, {"region", {r.region.x, r.region.y, r.region.width, r.region.height}},
                        {"threshold_db", r.threshold_db}});
      std::cout << json{{"directory", m.directory.string()}, {"scale", std::string(harness::to_string(m.scale))},
                        {"records", m.records.size()}, {"missing", m.missing}, {"entries", recs}}
                       .dump(2)
                << '\n';
    } else if (*sal) {
      const auto manifest = harness::ingest_masking_dataset(sal_dir, harness::parse_scale(sal_scale), sal_fill);
      const auto model = sal_model.load();
      sal_opt.metric.order = metrics::parse_metric_order(sal_order);
      sal_opt.metric.law = stimuli::parse_noise_law(sal_law);
      sal_opt.metric.workers = workers;
      sal_opt.logistic = parse_logistic(sal_logistic);
      sal_opt.taps = taps;
      sal_opt.seed = seed;
      const auto rep = harness::run_saliency_experiment(manifest, model, sal_opt);
      sal_out.emit(rep.table, harness::to_json(rep));
    } else if (*ctx) {
      const auto model = ctx_model.load();
      ctx_opt.metric.workers = workers;
      ctx_opt.taps = taps;
      ctx_opt.seed = seed;
      if (!ctx_human.empty()) ctx_opt.human_csv = ctx_human;
      const auto rep = harness::run_context_experiment(stimuli::parse_paradigm(ctx_paradigm), model, ctx_opt);
      ctx_out.emit(rep.table, harness::to_json(rep));
    } else if (*con) {
      const auto model = con_model.load();
      con_opt.metric.order = metrics::parse_metric_order(con_order);
      con_opt.metric.workers = workers;
      con_opt.taps = taps;
      con_opt.seed = seed;
      if (!con_human.empty()) con_opt.human_csv = con_human;
      const auto rep = harness::run_contrast_experiment(model, con_opt);
      for (double f : rep.dropped_frequencies)
        std::cerr << "note: dropped frequency " << f << " (at or above the Nyquist limit)\n";
      con_out.emit(rep.table, harness::to_json(rep));
    } else if (*ev) {
      const auto table = harness::load_csv(ev_table);
      const auto manifest = harness::ingest_masking_dataset(ev_dir);
      const auto e = harness::evaluate_saliency_rows(table.rows, manifest, parse_logistic(ev_logistic), ev_residuals);
      json out = harness::to_json(e);
      out["config_hash"] = table.config_hash;
      if (ev_report.empty()) {
        std::cout << out.dump(2) << '\n';
      } else {
        std::ofstream f(ev_report, std::ios::trunc);
        if (!f) throw Error("cannot write " + ev_report);
        f << out.dump(2) << '\n';
      }
    } else if (*exp) {
      if (!exp_model.source.starts_with("builtin:")) throw ValidationError("export-bank needs a builtin:* model");
      const auto model = exp_model.load();
      nwf::save(model.graph, exp_path);
      std::cout << exp_path << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
