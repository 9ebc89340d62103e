// cshield command-line front end: dataset/constraint generation, training,
// empirical safety verification, plot-data export, and summary tables.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cshield/benchmarks.hpp"
#include "cshield/parallel.hpp"
#include "cshield/serialize.hpp"

namespace fs = std::filesystem;
using namespace cshield;

namespace {

struct BenchmarkSpecs {
  DenseNetSpec standard_spec;
  DenseNetSpec trunk_spec;
  DenseNetSpec head_spec;
  LossKind default_loss = LossKind::kMse;
};

BenchmarkSpecs specs_for(const std::string& benchmark) {
  if (benchmark == "synthetic1d") return {{{1, 10, 1}, false}, {{1, 10}, true}, {{10, 1}, false}, LossKind::kMse};
  if (benchmark == "synthetic2d") {
    return {{{2, 20, 20, 1}, false}, {{2, 20, 20}, true}, {{20, 20, 1}, false}, LossKind::kMse};
  }
  if (benchmark == "caslite") {
    return {{{3, 45, 45, 45, 45, 45, 45, 9}, false},
            {{3, 45, 45, 45, 45}, true},
            {{45, 45, 45, 9}, false},
            LossKind::kAsymmetric};
  }
  throw SpecError("unknown benchmark '" + benchmark + "'");
}

BenchmarkBundle make_bundle(const std::string& benchmark, const std::string& a_prev, int n,
                            uint64_t seed) {
  if (benchmark == "synthetic1d") return gen_synthetic_1d(n, seed);
  if (benchmark == "synthetic2d") return gen_synthetic_2d(n, seed);
  if (benchmark == "caslite") {
    if (a_prev != "coc" && a_prev != "cl1500") {
      throw SpecError("caslite requires --a-prev coc|cl1500");
    }
    return caslite_dataset(caslite_tables(), a_prev == "coc" ? APrev::kCoc : APrev::kCl1500);
  }
  throw SpecError("unknown benchmark '" + benchmark + "'");
}

struct DataDir {
  Dataset dataset;
  ConstraintFile constraints;
  std::string constraints_hash;
  std::string benchmark;
  std::string a_prev;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir d;
  d.dataset = load_dataset_csv((fs::path(dir) / "dataset.csv").string());
  const json cj = parse_json_file((fs::path(dir) / "constraints.json").string());
  d.constraints = constraint_file_from_json(cj);
  d.constraints_hash = canonical_json_hash(cj);
  const json prov = parse_json_file((fs::path(dir) / "provenance.json").string());
  d.benchmark = prov.at("benchmark").get<std::string>();
  if (prov.contains("a_prev")) d.a_prev = prov.at("a_prev").get<std::string>();
  return d;
}

Predictor predictor_of(const StandardModel& m) {
  return [&m](std::span<const double> x) { return m.predict(x); };
}
Predictor predictor_of(const SafePredictorModel& m) {
  return [&m](std::span<const double> x) { return m.predict(x); };
}

// Probe set for empirical verification: the declared grid (or a uniform one),
// random interior points, and the constraint-region boundary points.
std::vector<Vec> verification_probes(const ConstraintFile& cf, long resolution, uint64_t seed,
                                     std::string* spec_out) {
  std::vector<Vec> probes;
  std::string desc;
  if (!cf.probe_axes.empty()) {
    probes = grid_probes_from_axes(cf.probe_axes);
    desc = "declared grid (" + std::to_string(probes.size()) + " cells)";
    Rng rng(seed);
    auto rand = random_probes(cf.domain, static_cast<size_t>(resolution), rng);
    desc += " + " + std::to_string(rand.size()) + " random interior points";
    probes.insert(probes.end(), rand.begin(), rand.end());
  } else {
    const Box bb = cf.domain.bounding_box();
    const int dim = cf.domain.dim();
    std::vector<int> counts;
    if (dim == 1) {
      counts = {static_cast<int>(resolution)};
    } else {
      const int per = std::max(2, static_cast<int>(std::llround(
                                      std::pow(static_cast<double>(resolution), 1.0 / dim))));
      counts.assign(static_cast<size_t>(dim), per);
    }
    probes = grid_probes(bb, counts);
    keep_probes_in_region(probes, cf.domain);
    desc = "uniform grid (" + std::to_string(probes.size()) + " points)";
  }
  auto edge = boundary_probes(cf.constraints);
  keep_probes_in_region(edge, cf.domain);
  desc += " + " + std::to_string(edge.size()) + " region boundary points";
  probes.insert(probes.end(), edge.begin(), edge.end());
  if (spec_out) *spec_out = desc;
  return probes;
}

// Violation-count hook used during training: dataset points inside some
// constraint region plus all region boundary points.
std::vector<Vec> training_check_probes(const Dataset& ds, const ConstraintFile& cf) {
  std::vector<Vec> probes;
  for (size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.input(i);
    for (const ConstraintSpec& c : cf.constraints) {
      if (c.region.contains(x)) {
        probes.emplace_back(x.begin(), x.end());
        break;
      }
    }
  }
  auto edge = boundary_probes(cf.constraints);
  keep_probes_in_region(edge, cf.domain);
  probes.insert(probes.end(), edge.begin(), edge.end());
  return probes;
}

int cmd_gen(const std::string& benchmark, const std::string& a_prev, int n, uint64_t seed,
            const std::string& out_dir) {
  const BenchmarkBundle bundle = make_bundle(benchmark, a_prev, n, seed);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  save_dataset_csv(bundle.dataset, (out / "dataset.csv").string());
  const json cj = constraint_file_to_json(constraint_file_of(bundle));
  save_json_file(cj, (out / "constraints.json").string());

  json prov;
  prov["format_version"] = kFormatVersion;
  prov["benchmark"] = benchmark;
  if (benchmark == "caslite") prov["a_prev"] = a_prev;
  prov["n"] = static_cast<long>(bundle.dataset.size());
  prov["seed"] = seed;
  prov["files"] = json{{"dataset.csv", fnv1a64_hex(read_text_file((out / "dataset.csv").string()))},
                       {"constraints.json", canonical_json_hash(cj)}};
  save_json_file(prov, (out / "provenance.json").string());

  std::cout << "generated " << bundle.dataset.size() << " samples, " << bundle.constraints.size()
            << " constraints -> " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& model_kind, const TrainConfig& config,
              const std::string& out_dir) {
  const DataDir data = load_data_dir(data_dir);
  const BenchmarkSpecs specs = specs_for(data.benchmark);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  TrainConfig cfg = config;

  // The desk-scale collision-avoidance benchmark trains on a stratified
  // 80/20 split; the synthetic benchmarks train on the full sample.
  Dataset train_split = data.dataset;
  std::optional<Dataset> test_split;
  if (data.benchmark == "caslite") {
    auto [tr, te] = split_dataset(data.dataset, 0.8, cfg.seed);
    train_split = std::move(tr);
    test_split = std::move(te);
  }

  const std::vector<Vec> check_probes = training_check_probes(train_split, data.constraints);
  bool checkpoint_violation = false;

  auto run = [&](auto& model) {
    model.constraint_hash = data.constraints_hash;
    TrainHooks hooks;
    hooks.count_violations = [&]() {
      const ViolationReport r =
          check_violations(predictor_of(model), data.constraints.constraints, check_probes);
      return r.total_violations;
    };
    const auto history = train(model, train_split, cfg, hooks);
    for (const EpochMetrics& m : history) checkpoint_violation |= m.violations > 0;

    save_metrics_csv(history, (out / "metrics.csv").string());
    save_json_file(model_to_json(model), (out / "model.json").string());

    json summary;
    summary["model"] = model_kind;
    summary["benchmark"] = data.benchmark;
    summary["epochs"] = cfg.epochs;
    summary["train_samples"] = static_cast<long>(train_split.size());
    if (!history.empty()) {
      summary["final_loss"] = history.back().loss;
      summary["final_train_fit"] = history.back().accuracy;
      summary["final_violations"] = history.back().violations;
    }
    if (test_split) {
      summary["test_samples"] = static_cast<long>(test_split->size());
      summary["test_accuracy"] = accuracy(predictor_of(model), *test_split).percent;
    }
    save_json_file(summary, (out / "train_summary.json").string());
    std::cout << summary.dump(2) << "\n";
  };

  if (model_kind == "standard") {
    StandardModel model(specs.standard_spec, cfg.seed);
    run(model);
  } else if (model_kind == "safe") {
    SafePredictorModel model =
        build_safe_predictor(data.constraints.constraints, data.constraints.domain,
                             specs.trunk_spec, specs.head_spec, cfg.seed,
                             data.constraints.distance_scale);
    run(model);
    save_json_file(describe_model(model), (out / "describe.json").string());
  } else {
    throw SpecError("--model must be safe or standard");
  }

  if (model_kind == "safe" && checkpoint_violation) {
    std::cerr << "safe model reported violations at a training checkpoint; "
                 "this indicates an implementation bug\n";
    return 3;
  }
  return 0;
}

int cmd_verify(const std::string& model_path, const std::string& constraints_path,
               const std::string& data_dir, long resolution, uint64_t seed,
               const std::string& name, const std::string& out_path) {
  const json cj = parse_json_file(constraints_path);
  const ConstraintFile cf = constraint_file_from_json(cj);
  const std::string cf_hash = canonical_json_hash(cj);

  const json mj = parse_json_file(model_path);
  const std::string stored_hash = mj.at("constraint_spec_hash").get<std::string>();
  if (stored_hash != cf_hash) {
    throw IoError("constraint hash mismatch: model was built against " + stored_hash +
                  " but " + constraints_path + " hashes to " + cf_hash);
  }
  const std::string kind = mj.at("kind").get<std::string>();

  StandardModel standard;
  SafePredictorModel safe;
  Predictor predict;
  if (kind == "standard") {
    standard = standard_model_from_json(mj);
    predict = predictor_of(standard);
  } else {
    safe = safe_model_from_json(mj, cf);
    predict = predictor_of(safe);
  }

  std::string probe_desc;
  const std::vector<Vec> probes = verification_probes(cf, resolution, seed, &probe_desc);
  ViolationReport report = check_violations(predict, cf.constraints, probes);
  report.probe_spec = probe_desc;

  json out = report_to_json(report);
  out["model"] = model_path;
  out["kind"] = kind;
  if (!name.empty()) out["name"] = name;
  if (!data_dir.empty()) {
    const DataDir data = load_data_dir(data_dir);
    const AccuracyResult acc = accuracy(predict, data.dataset);
    out["accuracy"] = acc.percent;
    out["accuracy_kind"] = acc.label();
  }
  if (!out_path.empty()) save_json_file(out, out_path);
  std::cout << out.dump(2) << "\n";

  if (kind == "safe" && report.total_violations > 0) {
    std::cerr << "safe model violated constraints; this indicates an implementation bug\n";
    return 3;
  }
  return 0;
}

int cmd_export_plots(const std::string& model_path, const std::string& constraints_path,
                     long resolution, double slice_vo, const std::string& out_dir) {
  const json cj = parse_json_file(constraints_path);
  const ConstraintFile cf = constraint_file_from_json(cj);
  const std::string cf_hash = canonical_json_hash(cj);
  const json mj = parse_json_file(model_path);
  if (mj.at("constraint_spec_hash").get<std::string>() != cf_hash) {
    throw IoError("constraint hash mismatch between model and constraints file");
  }
  const std::string kind = mj.at("kind").get<std::string>();
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  StandardModel standard;
  SafePredictorModel safe;
  const bool is_safe = kind == "safe";
  if (is_safe) {
    safe = safe_model_from_json(mj, cf);
  } else {
    standard = standard_model_from_json(mj);
  }
  Predictor predict = is_safe ? predictor_of(safe) : predictor_of(standard);

  const int dim = cf.domain.dim();
  if (dim == 1) {
    const Box bb = cf.domain.bounding_box();
    std::string csv = "x,F";
    if (is_safe) {
      for (const auto& h : safe.heads()) csv += ",G_" + h.key.to_string();
      for (const auto& h : safe.heads()) csv += ",w_" + h.key.to_string();
    }
    csv += "\n";
    const long n = std::max<long>(resolution, 2);
    for (long i = 0; i < n; ++i) {
      const double x = bb[0].lo + (bb[0].hi - bb[0].lo) * i / (n - 1);
      const Vec xs{x};
      csv += format_double(x) + "," + format_double(predict(xs)[0]);
      if (is_safe) {
        const Vec prox = safe.proximities(xs);
        for (size_t b = 0; b < safe.heads().size(); ++b) {
          csv += "," + format_double(safe.constrained_forward(static_cast<int>(b), xs)[0]);
        }
        for (const auto& h : safe.heads()) {
          csv += "," + format_double(SafePredictorModel::weight_of(prox, h.key));
        }
      }
      csv += "\n";
    }
    write_text_file((out / "curves_1d.csv").string(), csv);
    std::cout << "wrote " << (out / "curves_1d.csv").string() << "\n";
  } else if (dim == 2) {
    const Box bb = cf.domain.bounding_box();
    const int per = std::max(2, static_cast<int>(std::llround(std::sqrt(static_cast<double>(resolution)))));
    std::string csv = "x0,x1,F\n";
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < per; ++j) {
        const double x0 = bb[0].lo + (bb[0].hi - bb[0].lo) * i / (per - 1);
        const double x1 = bb[1].lo + (bb[1].hi - bb[1].lo) * j / (per - 1);
        csv += format_double(x0) + "," + format_double(x1) + "," +
               format_double(predict(Vec{x0, x1})[0]) + "\n";
      }
    }
    write_text_file((out / "surface_2d.csv").string(), csv);
    std::cout << "wrote " << (out / "surface_2d.csv").string() << " (" << per << "x" << per
              << " grid)\n";
  } else if (dim == 3 && is_safe) {
    // Distance and proximity over the (h, tau) plane at a fixed vertical rate.
    std::string csv = "h,tau";
    for (const auto& c : cf.constraints) csv += ",d_" + c.name + ",prox_" + c.name;
    csv += "\n";
    const auto& h_axis = cf.probe_axes.size() == 3 ? cf.probe_axes[1] : Vec{};
    const auto& t_axis = cf.probe_axes.size() == 3 ? cf.probe_axes[2] : Vec{};
    if (h_axis.empty() || t_axis.empty()) throw SpecError("export-plots: missing probe axes");
    for (double h : h_axis) {
      for (double t : t_axis) {
        const Vec x{slice_vo, h, t};
        csv += format_double(h) + "," + format_double(t);
        const Vec d = safe.distances(x);
        for (size_t i = 0; i < d.size(); ++i) {
          csv += "," + format_double(d[i]) + "," +
                 format_double(proximity_eval(safe.proximity_of(static_cast<int>(i)), d[i]));
        }
        csv += "\n";
      }
    }
    write_text_file((out / "proximity_slice.csv").string(), csv);
    std::cout << "wrote " << (out / "proximity_slice.csv").string() << " (vO-vI = " << slice_vo
              << " ft/s)\n";
  } else {
    throw SpecError("export-plots: unsupported benchmark/model combination");
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_prefix) {
  std::vector<RunSummary> runs;
  for (const std::string& path : inputs) {
    const json j = parse_json_file(path);
    RunSummary r;
    r.name = j.contains("name") ? j.at("name").get<std::string>() : path;
    r.accuracy_percent = j.contains("accuracy") ? j.at("accuracy").get<double>() : 0.0;
    r.violation_percent = j.at("violation_percent").get<double>();
    runs.push_back(std::move(r));
  }
  const ReportTable table = report_table(runs);
  std::cout << table.text;
  if (!out_prefix.empty()) {
    write_text_file(out_prefix + ".txt", table.text);
    write_text_file(out_prefix + ".csv", table.csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cshield: constraint-shielded predictors"};
  app.require_subcommand(1);

  std::string benchmark, a_prev, out_dir, data_dir, model_kind, model_path, constraints_path;
  std::string config_path, name, out_path, out_prefix;
  std::vector<std::string> report_inputs;
  int n = 0;
  uint64_t seed = 0;
  long resolution = 100000;
  double slice_vo = -180.0;

  auto* gen = app.add_subcommand("gen", "generate a benchmark dataset and constraint file");
  gen->add_option("--benchmark", benchmark, "synthetic1d|synthetic2d|caslite")->required();
  gen->add_option("--a-prev", a_prev, "coc|cl1500 (caslite only)");
  gen->add_option("--n", n, "sample count (synthetic benchmarks)");
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on a generated dataset");
  train_cmd->add_option("--data", data_dir, "directory produced by gen")->required();
  train_cmd->add_option("--model", model_kind, "safe|standard")->required();
  train_cmd->add_option("--config", config_path, "TrainConfig JSON file");
  auto* epochs_opt = train_cmd->add_option("--epochs", "training epochs");
  auto* lr_opt = train_cmd->add_option("--lr", "learning rate");
  auto* seed_opt = train_cmd->add_option("--seed", "training seed");
  auto* batch_opt = train_cmd->add_option("--batch-size", "batch size");
  auto* loss_opt = train_cmd->add_option("--loss", "mse|asymmetric");
  auto* check_opt = train_cmd->add_option("--check-every", "violation check cadence (epochs)");
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "check a model against its constraints");
  verify->add_option("--model", model_path, "model.json")->required();
  verify->add_option("--constraints", constraints_path, "constraints.json")->required();
  verify->add_option("--data", data_dir, "optional data directory for accuracy");
  verify->add_option("--probe-resolution", resolution, "probe budget (default 100000)");
  verify->add_option("--seed", seed, "random probe seed");
  verify->add_option("--name", name, "run label for reports");
  verify->add_option("--out", out_path, "write the report JSON here");

  auto* export_cmd = app.add_subcommand("export-plots", "emit plot-ready CSV data");
  export_cmd->add_option("--model", model_path, "model.json")->required();
  export_cmd->add_option("--constraints", constraints_path, "constraints.json")->required();
  export_cmd->add_option("--probe-resolution", resolution, "export resolution");
  export_cmd->add_option("--slice-vo", slice_vo, "vO-vI slice for the proximity plot (ft/s)");
  export_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* report = app.add_subcommand("report", "summarize verify outputs as a table");
  report->add_option("--in", report_inputs, "verify report JSON files")->required();
  report->add_option("--out-prefix", out_prefix, "write <prefix>.txt and <prefix>.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (benchmark == "caslite" && a_prev.empty()) {
        std::cerr << "error: caslite requires --a-prev coc|cl1500\n";
        return 2;
      }
      if (n == 0) n = benchmark == "synthetic1d" ? 512 : 2048;
      return cmd_gen(benchmark, a_prev, n, seed, out_dir);
    }
    if (train_cmd->parsed()) {
      TrainConfig cfg;
      if (!config_path.empty()) cfg = train_config_from_json(parse_json_file(config_path));
      if (cfg.loss == LossKind::kMse && config_path.empty()) {
        // default loss follows the benchmark
        const json prov = parse_json_file((fs::path(data_dir) / "provenance.json").string());
        cfg.loss = specs_for(prov.at("benchmark").get<std::string>()).default_loss;
      }
      if (*epochs_opt) cfg.epochs = epochs_opt->as<int>();
      if (*lr_opt) cfg.learning_rate = lr_opt->as<double>();
      if (*seed_opt) cfg.seed = seed_opt->as<uint64_t>();
      if (*batch_opt) cfg.batch_size = batch_opt->as<int>();
      if (*loss_opt) {
        const std::string l = loss_opt->as<std::string>();
        if (l != "mse" && l != "asymmetric") throw SpecError("--loss must be mse or asymmetric");
        cfg.loss = l == "mse" ? LossKind::kMse : LossKind::kAsymmetric;
      }
      if (*check_opt) cfg.check_every = check_opt->as<int>();
      cfg.validate();
      return cmd_train(data_dir, model_kind, cfg, out_dir);
    }
    if (verify->parsed()) {
      return cmd_verify(model_path, constraints_path, data_dir, resolution, seed, name, out_path);
    }
    if (export_cmd->parsed()) {
      return cmd_export_plots(model_path, constraints_path, resolution, slice_vo, out_dir);
    }
    if (report->parsed()) {
      return cmd_report(report_inputs, out_prefix);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
