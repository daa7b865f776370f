// fm3d command line: plan, train, eval, gradcheck, ratio.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fm3d/checkpoint.hpp"
#include "fm3d/config.hpp"
#include "fm3d/dataset.hpp"
#include "fm3d/ini.hpp"
#include "fm3d/network.hpp"
#include "fm3d/planner.hpp"
#include "fm3d/trainer.hpp"
#include "json.hpp"

namespace {

using namespace fm3d;
using json = nlohmann::ordered_json;

struct Common {
  std::string format = "text";
  std::string grad_mode;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void apply_overrides(RunConfig& c, const Common& o) {
  if (!o.grad_mode.empty()) c.grad_mode = parse_grad_mode(o.grad_mode);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.out_dir = o.out;
}

bool structured(const Common& o) { return parse_report_format(o.format) == ReportFormat::Structured; }

int cmd_plan(const std::string& path, const Common& o) {
  const NetPlan plan = plan_description(load_net_description(path));
  std::cout << render_plan_report(plan, parse_report_format(o.format));
  return 0;
}

int cmd_train(const std::string& path, const Common& o, const std::string& resume) {
  RunConfig c = parse_config(path);
  apply_overrides(c, o);
  if (!resume.empty()) c.resume = resume;
  for (const TrainResult& r : train(c)) {
    if (structured(o)) {
      for (const auto& rec : r.records) std::cout << metrics_line(rec) << "\n";
      json s;
      s["record"] = "summary";
      s["variant"] = to_string(r.variant);
      s["params"] = r.param_count;
      s["checkpoint"] = r.checkpoint.string();
      std::cout << s.dump() << "\n";
      continue;
    }
    std::cout << "variant " << to_string(r.variant) << "  params " << r.param_count << "\n";
    for (const auto& rec : r.records) {
      std::printf("epoch %3llu  loss %.6f  train_acc %.4f", static_cast<unsigned long long>(rec.epoch),
                  rec.train_loss, rec.train_acc);
      if (rec.eval_acc) std::printf("  eval_acc %.4f", *rec.eval_acc);
      std::printf("\n");
    }
    std::fflush(stdout);
    std::cout << "checkpoint " << r.checkpoint.string() << "\n";
  }
  return 0;
}

// Data arguments: IMAGES LABELS (idx), FILE.csv, or synth:SEED:N.
Dataset load_eval_data(const std::vector<std::string>& args, const Checkpoint& ckpt) {
  const NetDescription net = parse_net_description(ckpt.net_description, "checkpoint");
  if (args.size() == 2) return load_idx(args[0], args[1]);
  if (args.size() == 1 && args[0].rfind("synth:", 0) == 0) {
    const std::string rest = args[0].substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw Error(Errc::BadValue, "expected synth:SEED:N");
    if (!net.input) throw Error(Errc::BadDims, "checkpoint network has no input shape");
    return synth_dataset(parse_uint(rest.substr(0, colon)), int(parse_int(rest.substr(colon + 1))),
                         output_classes(net), net.input->h, net.input->w, net.input->c);
  }
  if (args.size() == 1) {
    if (!net.input) throw Error(Errc::BadDims, "checkpoint network has no input shape");
    return load_csv(args[0], net.input->c, net.input->h, net.input->w);
  }
  throw Error(Errc::BadValue, "expected IMAGES LABELS, FILE.csv or synth:SEED:N");
}

int cmd_eval(const std::string& path, const std::vector<std::string>& data, const Common& o) {
  const Checkpoint ckpt = load_checkpoint(path);
  const EvalResult r = evaluate(ckpt, load_eval_data(data, ckpt));
  if (structured(o)) {
    json j;
    j["record"] = "eval";
    j["count"] = r.count;
    j["accuracy"] = r.accuracy;
    j["mean_loss"] = r.mean_loss;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("samples %zu  accuracy %.4f  mean_loss %.6f\n", r.count, r.accuracy, r.mean_loss);
  }
  return 0;
}

int cmd_gradcheck(const std::string& path, const Common& o, bool count_scaled, double threshold) {
  RunConfig c = parse_config(path);
  apply_overrides(c, o);
  GradCheckOptions opt;
  opt.threshold = threshold;
  if (count_scaled) opt.compare = GradCompare::CountScaled;
  const GradCheckReport r = run_gradcheck(c, opt);
  if (structured(o)) {
    json j;
    j["record"] = "gradcheck";
    j["grad_mode"] = to_string(c.grad_mode);
    j["max_rel_err"] = r.max_rel_err;
    j["worst_param"] = r.worst_param;
    j["worst_index"] = r.worst_index;
    j["coords"] = r.coords_checked;
    j["passed"] = r.passed;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("grad_mode %s  coords %zu  max_rel_err %.3e at %s[%zu]  %s\n",
                std::string(to_string(c.grad_mode)).c_str(), r.coords_checked, r.max_rel_err,
                r.worst_param.c_str(), r.worst_index, r.passed ? "PASS" : "FAIL");
  }
  return r.passed ? 0 : 1;
}

FilterMapSpec spec_from_args(const std::string& filter, const std::string& grid, const std::string& strides) {
  auto three = [](const std::string& text, const char* what) {
    const auto d = parse_dims(text);
    if (d.size() != 3) throw Error(Errc::BadValue, std::string(what) + " needs three dims, got '" + text + "'");
    return d;
  };
  const auto f = three(filter, "filter");
  const auto g = three(grid, "grid");
  FilterMapSpec s;
  s.shape = {int(f[0]), int(f[1]), int(f[2])};
  s.grid = {int(g[0]), int(g[1]), int(g[2])};
  if (strides.empty()) {
    if (s.grid.k3 <= 0 || s.shape.c % s.grid.k3 != 0) {
      throw Error(Errc::ChannelNotDivisible, "channels not divisible by k3; give strides explicitly");
    }
    s.strides = {2, 2, s.shape.c / s.grid.k3};
  } else {
    const auto t = three(strides, "strides");
    s.strides = {int(t[0]), int(t[1]), int(t[2])};
  }
  return s;
}

int cmd_ratio(const std::string& filter, const std::string& grid, const std::string& strides, const Common& o) {
  const FilterMapSpec s = spec_from_args(filter, grid, strides);
  validate_spec(s);
  const MapDims m = map_dims(s);
  const std::int64_t baseline = std::int64_t(s.grid.count()) * std::int64_t(s.shape.size());
  const Ratio r = param_ratio(s);
  if (structured(o)) {
    json j;
    j["record"] = "ratio";
    j["map_dims"] = {m.m1, m.m2, m.mc};
    j["baseline"] = baseline;
    j["planned"] = m.size();
    j["ratio"] = to_string(r);
    std::cout << j.dump() << "\n";
  } else {
    std::cout << to_string(s) << "\n"
              << "map " << m.m1 << "x" << m.m2 << "x" << m.mc << "  baseline " << baseline << "  planned "
              << m.size() << "  ratio " << to_string(r) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D filter-map CNN toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--format", common.format, "text or structured")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();

  std::string path, resume, filter, grid, strides;
  std::vector<std::string> data;
  bool count_scaled = false;
  double threshold = 1e-5;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--grad-mode", common.grad_mode, "sum or average")->check(CLI::IsMember({"sum", "average"}));
    sub->add_option("--seed", common.seed, "override run seed");
  };

  auto* plan = app.add_subcommand("plan", "plan filter maps for a network description");
  plan->add_option("net", path, "network description file or builtin:toy")->required();

  auto* trn = app.add_subcommand("train", "train from a run configuration");
  trn->add_option("config", path, "run configuration")->required();
  add_run_flags(trn);
  trn->add_option("--out", common.out, "output directory");
  trn->add_option("--resume", resume, "checkpoint to continue from");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("checkpoint", path, "checkpoint file")->required();
  ev->add_option("data", data, "IMAGES LABELS | FILE.csv | synth:SEED:N")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check on the first batch");
  gc->add_option("config", path, "run configuration")->required();
  add_run_flags(gc);
  gc->add_flag("--count-scaled", count_scaled, "compare count-scaled average-mode gradients");
  gc->add_option("--threshold", threshold, "max relative error")->capture_default_str();

  auto* rt = app.add_subcommand("ratio", "parameter ratio of one filter-map spec");
  rt->add_option("filter", filter, "filter shape S1xS2xC")->required();
  rt->add_option("grid", grid, "filter grid K1xK2xK3")->required();
  rt->add_option("strides", strides, "strides XxYxZ (default 2x2x(C/K3))");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(path, common);
    if (*trn) return cmd_train(path, common, resume);
    if (*ev) return cmd_eval(path, data, common);
    if (*gc) return cmd_gradcheck(path, common, count_scaled, threshold);
    if (*rt) return cmd_ratio(filter, grid, strides, common);
  } catch (const fm3d::Error& e) {
    std::cerr << "fm3d: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fm3d: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
