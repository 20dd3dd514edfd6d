// Copyright 2026 The promptcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptcl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"

namespace promptcl {

namespace {

RunConfig prepare_config(const RunOptions& opts) {
  RunConfig cfg = load_config(opts.config);
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.out) cfg.run.out_dir = opts.out->string();
  if (opts.provider_url) {
    cfg.taskid.provider = "http";
    cfg.taskid.url = *opts.provider_url;
  }
  validate_config(cfg);
  return cfg;
}

// Runs one configuration and writes its outputs. Returns the exit status.
int execute(const RunConfig& cfg, const std::filesystem::path& base_dir,
            const std::filesystem::path& out_dir, RunReport* keep, std::ostream& err) {
  const TaskStream stream = load_stream(cfg, base_dir);
  RunReport report = run_stream(stream, cfg);
  write_run_outputs(report, out_dir, cfg.run.write_snapshot);
  const int status = report.partial ? kExitRuntime : kExitOk;
  if (report.partial) err << "run stopped early (partial report written): " << report.error << '\n';
  if (keep != nullptr) *keep = std::move(report);
  return status;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = prepare_config(opts);
    RunReport report;
    const int status = execute(cfg, opts.config.parent_path(), cfg.run.out_dir, &report, err);
    out << "wrote " << (std::filesystem::path(cfg.run.out_dir) / "results.json").string() << '\n';
    out << "tasks " << report.tasks.size() << ", final pool " << report.final_pool.size()
        << ", avg accuracy task-aware " << format_real(report.aware_metrics.average_final)
        << ", task-agnostic " << format_real(report.agnostic_metrics.average_final) << '\n';
    return status;
  });
}

AblationAxis parse_axis(const std::string& text) {
  AblationAxis axis;
  const auto eq = text.find('=');
  axis.name = text.substr(0, eq);
  if (eq != std::string::npos) {
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) axis.values.push_back(item);
    }
    if (axis.values.empty()) throw ConfigError("axis '" + axis.name + "' lists no values");
  } else if (axis.name == "strategy") {
    axis.values = {"gradient", "fifo", "random", "keep_all"};
  } else if (axis.name == "decoding" || axis.name == "gradient_selection") {
    axis.values = {"on", "off"};
  } else if (axis.name == "alpha") {
    axis.values = {"0", "0.5", "1"};
  } else if (axis.name == "prompt_length") {
    axis.values = {"5", "10", "20"};
  }
  static const std::vector<std::string> known = {"strategy", "alpha", "prompt_length", "decoding",
                                                 "gradient_selection"};
  if (std::find(known.begin(), known.end(), axis.name) == known.end()) {
    throw ConfigError("unknown ablation axis '" + axis.name + "'");
  }
  for (const auto& v : axis.values) {
    RunConfig probe = default_config();
    apply_axis_value(probe, axis.name, v);
  }
  return axis;
}

namespace {

bool on_off(const std::string& axis, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError("axis " + axis + " takes on or off, not '" + v + "'");
}

double parse_number(const std::string& axis, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("axis " + axis + " needs numbers, got '" + v + "'");
}

}  // namespace

void apply_axis_value(RunConfig& cfg, const std::string& axis, const std::string& value) {
  if (axis == "strategy") {
    cfg.selection.strategy = strategy_from_string(value);
  } else if (axis == "alpha") {
    cfg.selection.alpha = parse_number(axis, value);
  } else if (axis == "prompt_length") {
    const double l = parse_number(axis, value);
    if (l < 1 || l != static_cast<double>(static_cast<std::size_t>(l))) {
      throw ConfigError("prompt_length must be a positive integer, got '" + value + "'");
    }
    cfg.training.prompt_length = static_cast<std::size_t>(l);
  } else if (axis == "decoding") {
    cfg.decoding.constrained = on_off(axis, value);
  } else if (axis == "gradient_selection") {
    cfg.selection.strategy = on_off(axis, value) ? Strategy::gradient : Strategy::keep_all;
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "'");
  }
}

int cmd_ablate(const RunOptions& opts, const std::vector<std::string>& axis_args,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (axis_args.empty()) throw ConfigError("ablate needs at least one --axis");
    const RunConfig base = prepare_config(opts);
    std::vector<AblationAxis> axes;
    for (const auto& a : axis_args) axes.push_back(parse_axis(a));

    struct Cell {
      std::string name;
      std::vector<std::string> values;
      RunReport report;
    };
    std::vector<Cell> cells;
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    for (std::size_t cell = 0; cell < total; ++cell) {
      // Mixed-radix index with the last axis varying fastest.
      std::vector<std::size_t> idx(axes.size());
      std::size_t rest = cell;
      for (std::size_t a = axes.size(); a-- > 0;) {
        idx[a] = rest % axes[a].values.size();
        rest /= axes[a].values.size();
      }
      Cell c;
      RunConfig cfg = base;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& v = axes[a].values[idx[a]];
        apply_axis_value(cfg, axes[a].name, v);
        c.values.push_back(v);
        if (!c.name.empty()) c.name += "__";
        c.name += axes[a].name + "-" + v;
      }
      validate_config(cfg);
      const std::filesystem::path dir = std::filesystem::path(base.run.out_dir) / c.name;
      cfg.run.out_dir = dir.string();
      execute(cfg, opts.config.parent_path(), dir, &c.report, err);
      out << "cell " << c.name << " done\n";
      cells.push_back(std::move(c));
    }

    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      const auto& a = cells[x].report.agnostic_metrics;
      const auto& b = cells[y].report.agnostic_metrics;
      if (a.average_final != b.average_final) return a.average_final > b.average_final;
      return a.bwt.value > b.bwt.value;
    });
    std::ostringstream csv;
    csv << "rank,cell";
    for (const auto& a : axes) csv << ',' << a.name;
    csv << ",avg_acc_task_agnostic,avg_acc_task_aware,bwt_task_agnostic,bwt_task_aware,"
           "fwt_task_agnostic,forgotten_task_agnostic,final_pool_size,memory_kb,partial\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
      const Cell& c = cells[order[r]];
      const RunReport& rep = c.report;
      csv << r + 1 << ',' << c.name;
      for (const auto& v : c.values) csv << ',' << v;
      csv << ',' << format_real(rep.agnostic_metrics.average_final) << ','
          << format_real(rep.aware_metrics.average_final) << ','
          << format_real(rep.agnostic_metrics.bwt.value) << ','
          << format_real(rep.aware_metrics.bwt.value) << ','
          << format_real(rep.agnostic_metrics.fwt.value) << ',' << rep.agnostic_metrics.forgotten
          << ',' << rep.final_pool.size() << ',' << format_real(rep.memory.total_kb) << ','
          << (rep.partial ? 1 : 0) << '\n';
    }
    std::filesystem::create_directories(base.run.out_dir);
    std::ofstream f(std::filesystem::path(base.run.out_dir) / "summary.csv", std::ios::binary);
    f << csv.str();
    out << "wrote " << cells.size() << " cells and summary.csv under " << base.run.out_dir << '\n';
    const bool any_partial = std::any_of(cells.begin(), cells.end(),
                                         [](const Cell& c) { return c.report.partial; });
    return any_partial ? kExitRuntime : kExitOk;
  });
}

namespace {

AccuracyMatrix matrix_from_json(const nlohmann::json& rows) {
  AccuracyMatrix R(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != rows.size()) throw InputError("accuracy matrix is not square");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[j][i].is_null()) R.set(j, i, rows[j][i].get<double>());
    }
  }
  return R;
}

std::string heatmap_csv(const AccuracyMatrix& R, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "checkpoint";
  for (const auto& n : names) out << ',' << csv_field(n);
  out << '\n';
  for (std::size_t j = 0; j < R.size(); ++j) {
    out << csv_field(names[j]);
    for (std::size_t i = 0; i < R.size(); ++i) {
      out << ',';
      if (i <= j && R.has(i, i) && R.has(j, i)) out << format_real(R.at(i, i) - R.at(j, i));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::filesystem::path path = dir / "results.json";
    std::ifstream in(path);
    if (!in) throw ConfigError("no results.json in " + dir.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const nlohmann::json doc = nlohmann::json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw InputError(path.string() + " is not valid JSON");
    std::vector<std::string> names;
    for (const auto& t : doc.at("tasks")) names.push_back(t.at("name").get<std::string>());
    const AccuracyMatrix aware = matrix_from_json(doc.at("accuracy").at("task_aware"));
    const AccuracyMatrix agn = matrix_from_json(doc.at("accuracy").at("task_agnostic"));
    if (aware.size() != names.size() || agn.size() != names.size()) {
      throw InputError("accuracy matrices do not match the task list");
    }
    auto write = [&](const char* file, const std::string& text) {
      std::ofstream f(dir / file, std::ios::binary);
      if (!f) throw InputError("cannot write " + (dir / file).string());
      f << text;
    };
    write("bwt_heatmap.csv", heatmap_csv(agn, names));
    write("bwt_heatmap_task_aware.csv", heatmap_csv(aware, names));
    std::ostringstream bars;
    bars << "task,bwt_task_aware,bwt_task_agnostic\n";
    const std::size_t n = names.size();
    for (std::size_t i = 0; i < n; ++i) {
      bars << csv_field(names[i]) << ',' << format_real(aware.at(n - 1, i) - aware.at(i, i)) << ','
           << format_real(agn.at(n - 1, i) - agn.at(i, i)) << '\n';
    }
    write("bwt_bars.csv", bars.str());

    out << std::left << std::setw(18) << "task" << std::right << std::setw(12) << "aware_diag"
        << std::setw(12) << "aware_end" << std::setw(12) << "agn_diag" << std::setw(12) << "agn_end"
        << '\n';
    out << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < n; ++i) {
      out << std::left << std::setw(18) << names[i] << std::right << std::setw(12) << aware.at(i, i)
          << std::setw(12) << aware.at(n - 1, i) << std::setw(12) << agn.at(i, i) << std::setw(12)
          << agn.at(n - 1, i) << '\n';
    }
    const auto& m = doc.at("metrics");
    for (const char* mode : {"task_aware", "task_agnostic"}) {
      const auto& mm = m.at(mode);
      out << mode << ": avg " << mm.at("average_final_accuracy").get<double>() << ", bwt "
          << mm.at("bwt").at("value").get<double>()
          << (mm.at("bwt").at("defined").get<bool>() ? "" : " (undefined)") << ", fwt "
          << mm.at("fwt").at("value").get<double>() << ", forgotten "
          << mm.at("forgotten_pairs").get<std::size_t>() << '\n';
    }
    out << "final pool " << doc.at("final_pool").size() << " prompts, "
        << doc.at("memory").at("total_kb").get<double>() << " KB\n";
    return kExitOk;
  });
}

int cmd_generate(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = prepare_config(opts);
    if (cfg.stream.source != "synthetic") throw ConfigError("generate needs a synthetic stream");
    const TaskStream stream = load_stream(cfg);
    const std::filesystem::path dir = cfg.run.out_dir;
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = {{"order_tag", stream.order_tag}, {"tasks", nlohmann::json::array()}};
    for (const auto& task : stream.tasks) {
      for (const auto& [split, data] :
           {std::pair<std::string, const Dataset*>{"train", &task.train}, {"test", &task.test}}) {
        std::ofstream f(dir / (task.spec.name + "." + split + ".jsonl"), std::ios::binary);
        for (const auto& ex : data->examples) {
          nlohmann::json rec;
          for (const auto& [k, v] : ex.fields) rec[k] = v;
          rec["label"] = ex.label;
          f << rec.dump() << '\n';
        }
      }
      manifest["tasks"].push_back({{"name", task.spec.name},
                                   {"train", task.spec.name + ".train.jsonl"},
                                   {"test", task.spec.name + ".test.jsonl"},
                                   {"schema", task.spec.fields},
                                   {"label_field", "label"}});
    }
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    out << "wrote " << stream.tasks.size() << " tasks to " << dir.string() << '\n';
    return kExitOk;
  });
}

int cli_main(int argc, char** argv) {
  CLI::App app{"promptcl: continual prompt-tuning simulator"};
  app.require_subcommand(1);
  RunOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string url;
  std::vector<std::string> axes;
  std::string report_dir;
  bool defaults_json = false;

  auto add_common = [&](CLI::App* sub, bool with_provider) {
    sub->add_option("--config", opts.config, "run config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides run.out_dir)");
    sub->add_option("--seed", seed, "master seed override");
    if (with_provider) sub->add_option("--provider-url", url, "remote label remapper endpoint");
  };
  CLI::App* run = app.add_subcommand("run", "run a task stream");
  add_common(run, true);
  CLI::App* ablate = app.add_subcommand("ablate", "sweep configuration axes");
  add_common(ablate, true);
  ablate->add_option("--axis", axes, "axis name or name=v1,v2 (repeatable)");
  CLI::App* report = app.add_subcommand("report", "render heatmap and bar data for a run");
  report->add_option("dir", report_dir, "run directory")->required();
  CLI::App* defaults = app.add_subcommand("defaults", "print every config key with its default");
  defaults->add_flag("--json", defaults_json, "print the default config as JSON");
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic stream as JSONL files");
  add_common(generate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  auto finish_opts = [&](CLI::App* sub) {
    if (sub->count("--out") > 0) opts.out = out_dir;
    if (sub->count("--seed") > 0) opts.seed = seed;
    if (sub->get_option_no_throw("--provider-url") != nullptr && sub->count("--provider-url") > 0) {
      opts.provider_url = url;
    }
  };
  if (*run) {
    finish_opts(run);
    return cmd_run(opts, std::cout, std::cerr);
  }
  if (*ablate) {
    finish_opts(ablate);
    return cmd_ablate(opts, axes, std::cout, std::cerr);
  }
  if (*report) return cmd_report(report_dir, std::cout, std::cerr);
  if (*generate) {
    finish_opts(generate);
    return cmd_generate(opts, std::cout, std::cerr);
  }
  if (*defaults) {
    if (defaults_json) {
      std::cout << config_to_json(default_config()).dump(2) << '\n';
    } else {
      std::cout << config_reference();
    }
    return kExitOk;
  }
  return kExitConfig;
}

}  // namespace promptcl
