#include <CLI11.hpp>
#include <json.hpp>

#include "seqtok/evaluator.hpp"
#include "seqtok/image_io.hpp"
#include "seqtok/plots.hpp"
#include "seqtok/rundir.hpp"
#include "seqtok/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using nlohmann::json;
using namespace seqtok;

namespace {

constexpr const char* kVersion = "seqtok 0.1.0";

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

GuidanceSpec parse_guidance(const std::string& text) {
  GuidanceSpec g;
  if (text.empty() || text == "none") return g;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "cfg") {
    g.kind = GuidanceSpec::Kind::cfg;
  } else if (kind == "autoguide") {
    g.kind = GuidanceSpec::Kind::autoguide;
  } else {
    throw ConfigError("unknown guidance '" + text + "' (expected none, cfg:SCALE, autoguide:SCALE)");
  }
  if (colon == std::string::npos) {
    throw ConfigError("guidance '" + text + "' is missing a scale (e.g. " + kind + ":1.5)");
  }
  try {
    size_t used = 0;
    g.scale = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trail");
  } catch (const std::exception&) {
    throw ConfigError("guidance scale in '" + text + "' is not a number");
  }
  return g;
}

std::string fresh_run_name(const std::string& kind) {
  static int counter = 0;
  std::string compact;
  for (char ch : timestamp_utc()) {
    if (std::isdigit(static_cast<unsigned char>(ch))) compact.push_back(ch);
  }
  return kind + "-" + compact + "-" + std::to_string(++counter);
}

RunDir make_run_dir(const std::string& out_flag, const std::string& kind) {
  if (out_flag.empty()) return RunDir::create(RunDir::default_root(), fresh_run_name(kind));
  std::filesystem::path p(out_flag);
  const std::string parent = p.parent_path().empty() ? "." : p.parent_path().string();
  return RunDir::create(parent, p.filename().string());
}

json base_manifest(const std::string& command, const TrainConfig& cfg) {
  json m;
  m["command"] = command;
  m["created"] = timestamp_utc();
  m["code_version"] = kVersion;
  m["seed"] = cfg.seed;
  m["config"] = json::parse(cfg.to_json_string());
  return m;
}

void apply_ema_weights(const Archive& a, ModelBundle& bundle) {
  for (Param* p : bundle.generator_params()) {
    const auto it = a.mats.find("ema." + p->name);
    if (it != a.mats.end() && it->second.rows() == p->value.rows() &&
        it->second.cols() == p->value.cols()) {
      p->value = it->second;
    }
  }
}

ModelBundle load_bundle(const std::string& ckpt_path, bool use_ema, TrainConfig* cfg_out = nullptr) {
  const Archive a = Archive::load(ckpt_path);
  const TrainConfig cfg = TrainConfig::from_json_string(a.text("config"));
  if (cfg_out) *cfg_out = cfg;
  ModelBundle b = ModelBundle::build(cfg);
  unpack_params(a, b.tokenizer_ps);
  unpack_params(a, b.ar_ps);
  unpack_params(a, b.disc_ps);
  if (use_ema) apply_ema_weights(a, b);
  return b;
}

void save_grid(const Mat& pixels, Eigen::Index batch, Eigen::Index side, const std::string& path) {
  const Eigen::Index cols =
      std::max<Eigen::Index>(1, Eigen::Index(std::ceil(std::sqrt(double(batch)))));
  Eigen::Index gh = 0, gw = 0;
  const Mat grid = tile_image_grid(pixels, batch, side, side, cols, gh, gw);
  write_ppm(path, grid, gh, gw);
}

std::vector<int> parse_class_list(const std::string& csv, long long count, long long num_classes) {
  std::vector<int> labels;
  if (!csv.empty()) {
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        labels.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("class list entry '" + item + "' is not an integer");
      }
    }
    if (labels.empty()) throw ConfigError("class list is empty");
  } else {
    for (long long i = 0; i < count; ++i) labels.push_back(static_cast<int>(i % num_classes));
  }
  for (int c : labels) {
    if (c < 0 || c >= num_classes) {
      throw ConfigError("class " + std::to_string(c) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
  return labels;
}

struct TrainArgs {
  std::string preset = "desk";
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out, name, resume;
  long long save_every = 0;
  long long log_every = 10;
};

int cmd_train(const TrainArgs& args) {
  TrainConfig cfg = TrainConfig::load(args.preset, args.config_path, args.overrides);
  Trainer trainer(cfg);
  if (!args.resume.empty()) trainer.load_checkpoint(args.resume);

  RunDir rd = args.out.empty()
                  ? RunDir::create(RunDir::default_root(),
                                   args.name.empty() ? fresh_run_name("train") : args.name)
                  : make_run_dir(args.out, "train");
  json manifest = base_manifest("train", cfg);
  manifest["dataset_fingerprint"] = hex64(trainer.dataset().fingerprint());
  if (!args.resume.empty()) {
    manifest["resumed_from"] = args.resume;
    manifest["resume_step"] = trainer.step();
  }
  rd.write_text("manifest.json", manifest.dump(2) + "\n");
  rd.write_text("config.json", cfg.to_json_string() + "\n");
  std::cout << "run dir: " << rd.path() << "\n";

  std::map<std::string, Series> series;
  auto log_point = [&](const std::string& name, Scalar v) {
    auto [it, inserted] = series.try_emplace(name, Series{name, {}});
    it->second.y.push_back(v);
  };

  try {
    while (trainer.step() < trainer.total_steps()) {
      const long long step = trainer.step();
      const StepOutput so = trainer.train_step();
      const bool log_now = args.log_every > 0 &&
                           (step % args.log_every == 0 || step + 1 == trainer.total_steps());
      if (log_now) {
        const Scalar usage = code_usage(so.ids, cfg.codebook_size);
        json rec;
        rec["step"] = step;
        rec["lr"] = so.lr;
        rec["total"] = so.losses.total;
        rec["components"] = so.losses.components;
        rec["ar_acc"] = so.ar_acc;
        rec["prefix"] = so.prefix;
        rec["grad_norm"] = so.grad_norm;
        rec["usage"] = usage;
        rd.append_line("metrics.jsonl", rec.dump());
        log_point("total", so.losses.total);
        for (const auto& [k, v] : so.losses.components) log_point(k, v);
        log_point("usage", usage);
        log_point("ar_acc", so.ar_acc);
        std::cout << "step " << step << "/" << trainer.total_steps() << "  total=" << so.losses.total
                  << "  l2=" << so.losses.get("l2") << "  usage=" << usage
                  << "  ar_acc=" << so.ar_acc << "\n";
      }
      if (args.save_every > 0 && step > 0 && step % args.save_every == 0) {
        trainer.save_checkpoint(rd.file("checkpoints/last.ckpt"));
      }
    }
  } catch (const DegenerateInputError& e) {
    trainer.save_checkpoint(rd.file("checkpoints/emergency.ckpt"));
    json rec;
    rec["step"] = trainer.step();
    rec["abort"] = e.what();
    rd.append_line("metrics.jsonl", rec.dump());
    std::cerr << "numerical abort: " << e.what() << "\n"
              << "emergency checkpoint: " << rd.file("checkpoints/emergency.ckpt") << "\n";
    return 2;
  }

  trainer.save_checkpoint(rd.file("checkpoints/final.ckpt"));

  // End-of-run artifacts: loss curves, reconstruction and sample grids.
  {
    json data;
    for (const auto& [name, s] : series) data[name] = s.y;
    rd.write_text("plots/series.json", data.dump(2) + "\n");
    for (const char* key : {"total", "l2", "ntp", "usage"}) {
      const auto it = series.find(key);
      if (it != series.end() && it->second.y.size() >= 2) {
        render_line_chart({it->second}, rd.file("plots/" + std::string(key) + ".ppm"));
      }
    }
  }
  {
    const Eigen::Index n = std::min<Eigen::Index>(16, trainer.dataset().val_size());
    const ImageBatch vb = trainer.dataset().val_batch(0, n);
    const auto [ids, z] = trainer.bundle().encode_ids(vb.pixels, n);
    const Mat recon = trainer.bundle().decode_ids(ids, n);
    save_grid(vb.pixels, n, cfg.image_size, rd.file("samples/real.ppm"));
    save_grid(recon, n, cfg.image_size, rd.file("samples/recon.ppm"));

    trainer.ema().swap_in();
    std::vector<int> labels(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % cfg.num_classes);
    SampleOptions opts;
    opts.seed = static_cast<uint64_t>(cfg.seed) + 500u;
    const std::vector<int> gen_ids = sample_ids(*trainer.bundle().ar, labels, opts);
    const Mat gen = trainer.bundle().decode_ids(gen_ids, n);
    trainer.ema().swap_out();
    save_grid(gen, n, cfg.image_size, rd.file("samples/generated.ppm"));
  }
  {
    json summary;
    summary["steps"] = trainer.step();
    summary["final_total"] = series.count("total") ? series["total"].y.back() : 0.0;
    summary["checkpoint"] = rd.file("checkpoints/final.ckpt");
    summary["finished"] = timestamp_utc();
    rd.write_text("reports/summary.json", summary.dump(2) + "\n");
  }
  std::cout << "final checkpoint: " << rd.file("checkpoints/final.ckpt") << "\n";
  return 0;
}

struct SampleArgs {
  std::string ckpt, classes_csv, guidance = "none", out;
  long long count = 16;
  double temperature = 1.0;
  bool greedy = false;
  bool no_ema = false;
  long long seed = 7;
};

int cmd_sample(const SampleArgs& args) {
  TrainConfig cfg;
  ModelBundle bundle = load_bundle(args.ckpt, !args.no_ema, &cfg);
  const std::vector<int> labels = parse_class_list(args.classes_csv, args.count, cfg.num_classes);
  GuidanceSpec guidance = parse_guidance(args.guidance);
  if (guidance.kind == GuidanceSpec::Kind::autoguide) guidance.aux = bundle.aux.get();

  RunDir rd = make_run_dir(args.out, "sample");
  json manifest = base_manifest("sample", cfg);
  manifest["checkpoint"] = args.ckpt;
  manifest["guidance"] = args.guidance;
  manifest["ema"] = !args.no_ema;
  rd.write_text("manifest.json", manifest.dump(2) + "\n");

  const Eigen::Index total = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index l = cfg.num_tokens;
  std::vector<int> all_ids;
  Mat pixels(total * cfg.image_size * cfg.image_size, cfg.channels);
  Eigen::Index done = 0;
  while (done < total) {
    const Eigen::Index take = std::min<Eigen::Index>(cfg.eval_batch, total - done);
    const std::vector<int> chunk(labels.begin() + done, labels.begin() + done + take);
    SampleOptions opts;
    opts.temperature = args.temperature;
    opts.greedy = args.greedy;
    opts.guidance = guidance;
    opts.seed = static_cast<uint64_t>(args.seed) + static_cast<uint64_t>(done);
    const std::vector<int> ids = sample_ids(*bundle.ar, chunk, opts);
    all_ids.insert(all_ids.end(), ids.begin(), ids.end());
    pixels.middleRows(done * cfg.image_size * cfg.image_size,
                      take * cfg.image_size * cfg.image_size) = bundle.decode_ids(ids, take);
    done += take;
  }
  save_grid(pixels, total, cfg.image_size, rd.file("samples/grid.ppm"));
  json out;
  out["labels"] = labels;
  json seqs = json::array();
  for (Eigen::Index b = 0; b < total; ++b) {
    seqs.push_back(std::vector<int>(all_ids.begin() + b * l, all_ids.begin() + (b + 1) * l));
  }
  out["ids"] = seqs;
  rd.write_text("samples/ids.json", out.dump(2) + "\n");
  std::cout << "wrote " << total << " samples to " << rd.file("samples/grid.ppm") << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, guidance = "cfg:1.5", out;
  long long seed = 11;
};

int cmd_eval(const EvalArgs& args) {
  TrainConfig cfg;
  ModelBundle bundle = load_bundle(args.ckpt, /*use_ema=*/false, &cfg);
  Dataset ds(cfg.dataset_spec());
  Evaluator ev(cfg);

  RunDir rd = make_run_dir(args.out, "eval");
  json manifest = base_manifest("eval", cfg);
  manifest["checkpoint"] = args.ckpt;
  manifest["dataset_fingerprint"] = hex64(ds.fingerprint());
  rd.write_text("manifest.json", manifest.dump(2) + "\n");

  const ReconMetrics rm = ev.eval_reconstruction(bundle, ds);
  const PrefixCurve pc = ev.prefix_sweep(bundle, ds, std::min<Eigen::Index>(32, ds.val_size()));

  // Generation runs on EMA weights.
  const Archive a = Archive::load(args.ckpt);
  apply_ema_weights(a, bundle);
  GuidanceSpec guidance = parse_guidance(args.guidance);
  if (guidance.kind == GuidanceSpec::Kind::autoguide) guidance.aux = bundle.aux.get();
  const GenMetrics gm =
      ev.eval_generation(bundle, ds, guidance, static_cast<uint64_t>(args.seed));

  json report;
  report["reconstruction"] = {{"psnr", rm.psnr},
                              {"ssim", rm.ssim},
                              {"perceptual", rm.perceptual},
                              {"rfid", rm.rfid},
                              {"regularized", rm.regularized}};
  report["generation"] = {{"gfid", gm.gfid},
                          {"class_coverage", gm.class_coverage},
                          {"class_counts", gm.class_counts},
                          {"guidance", args.guidance},
                          {"regularized", gm.regularized}};
  report["prefix_sweep"] = {{"psnr", pc.psnr}, {"mse", pc.mse}};
  rd.write_text("reports/eval.json", report.dump(2) + "\n");

  Series psnr_series{"psnr_by_prefix", pc.psnr};
  render_line_chart({psnr_series}, rd.file("plots/prefix_psnr.ppm"));

  std::cout << "reconstruction: psnr=" << rm.psnr << " ssim=" << rm.ssim
            << " perceptual=" << rm.perceptual << " rfid=" << rm.rfid << "\n"
            << "generation: gfid=" << gm.gfid << " coverage=" << gm.class_coverage << "\n"
            << "report: " << rd.file("reports/eval.json") << "\n";
  return 0;
}

struct DiagnoseArgs {
  std::string ckpt, out;
};

int cmd_diagnose(const DiagnoseArgs& args) {
  TrainConfig cfg;
  ModelBundle bundle = load_bundle(args.ckpt, /*use_ema=*/false, &cfg);
  Dataset ds(cfg.dataset_spec());
  Evaluator ev(cfg);

  RunDir rd = make_run_dir(args.out, "diagnose");
  json manifest = base_manifest("diagnose", cfg);
  manifest["checkpoint"] = args.ckpt;
  rd.write_text("manifest.json", manifest.dump(2) + "\n");

  const CollapseReport cr = ev.collapse(bundle, ds);
  json report;
  report["usage"] = cr.usage;
  report["top1_share"] = cr.top1_share;
  report["total_tokens"] = cr.total_tokens;
  report["histogram"] = cr.histogram;
  rd.write_text("reports/collapse.json", report.dump(2) + "\n");

  std::vector<Scalar> hist(cr.histogram.begin(), cr.histogram.end());
  render_bar_chart(hist, rd.file("plots/code_histogram.ppm"));
  {
    // Loss curves, when the checkpoint sits inside a run directory.
    const std::filesystem::path metrics =
        std::filesystem::path(args.ckpt).parent_path().parent_path() / "metrics.jsonl";
    std::ifstream in(metrics);
    std::vector<Scalar> total_curve;
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (rec.is_object() && rec.contains("total")) {
        total_curve.push_back(rec["total"].get<Scalar>());
      }
    }
    if (total_curve.size() >= 2) {
      render_line_chart({Series{"total", total_curve}}, rd.file("plots/loss_total.ppm"));
    }
  }
  {
    // Codebook and encoded latents in the shared codebook-PCA plane.
    Mat both(cr.codebook_pca.rows() + cr.latent_pca.rows(), 2);
    both.topRows(cr.codebook_pca.rows()) = cr.codebook_pca.leftCols(2);
    both.bottomRows(cr.latent_pca.rows()) = cr.latent_pca.leftCols(2);
    std::vector<int> colors(static_cast<size_t>(both.rows()), 0);
    for (Eigen::Index i = cr.codebook_pca.rows(); i < both.rows(); ++i) colors[i] = 1;
    render_scatter(both, colors, rd.file("plots/latent_space.ppm"));
  }
  std::cout << "usage=" << cr.usage << " top1_share=" << cr.top1_share << "\n"
            << "report: " << rd.file("reports/collapse.json") << "\n";
  return 0;
}

struct OrderingArgs {
  std::string ckpt, order = "original", out;
  long long perm_seed = 0;
  long long steps = 0;
};

int cmd_ordering(const OrderingArgs& args) {
  const TrainConfig cfg = Trainer::config_from_checkpoint(args.ckpt);
  RunDir rd = make_run_dir(args.out, "ordering");
  json manifest = base_manifest("ordering", cfg);
  manifest["checkpoint"] = args.ckpt;
  manifest["order"] = args.order;
  manifest["perm_seed"] = args.perm_seed;
  rd.write_text("manifest.json", manifest.dump(2) + "\n");

  std::vector<Scalar> ntp_curve;
  const OrderingResult res = run_ordering_experiment(
      cfg, args.ckpt, args.order, static_cast<uint64_t>(args.perm_seed), args.steps,
      [&](long long step, Scalar ntp) {
        if (step % 10 == 0) ntp_curve.push_back(ntp);
      });

  json report;
  report["order"] = res.order;
  report["permutation"] = res.permutation;
  report["distance"] = res.distance;
  report["ar_acc"] = res.ar_acc;
  report["ntp_final"] = res.ntp_final;
  rd.write_text("reports/ordering.json", report.dump(2) + "\n");
  if (ntp_curve.size() >= 2) {
    render_line_chart({Series{"ntp", ntp_curve}}, rd.file("plots/ordering_ntp.ppm"));
  }
  std::cout << "ordering " << res.order << ": distance=" << res.distance
            << " ar_acc=" << res.ar_acc << " ntp=" << res.ntp_final << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqtok: a 1D image-tokenizer + autoregressive generation training lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Joint tokenizer + generator training");
  train->add_option("--preset", train_args.preset, "Configuration preset (desk, S, B, L, H)");
  train->add_option("--config", train_args.config_path, "JSON config file layered over the preset");
  train->add_option("--set", train_args.overrides, "key=value override (repeatable)");
  train->add_option("--out", train_args.out, "Run directory (default: auto under run root)");
  train->add_option("--name", train_args.name, "Run name under the default root");
  train->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  train->add_option("--save-every", train_args.save_every, "Checkpoint interval in steps (0 = end only)");
  train->add_option("--log-every", train_args.log_every, "Metrics interval in steps");

  SampleArgs sample_args;
  CLI::App* sample = app.add_subcommand("sample", "Sample images from a trained checkpoint");
  sample->add_option("--ckpt", sample_args.ckpt, "Checkpoint path")->required();
  sample->add_option("--count", sample_args.count, "Number of samples");
  sample->add_option("--classes", sample_args.classes_csv, "Comma-separated class labels");
  sample->add_option("--guidance", sample_args.guidance, "none, cfg:SCALE, or autoguide:SCALE");
  sample->add_option("--temperature", sample_args.temperature, "Softmax temperature");
  sample->add_flag("--greedy", sample_args.greedy, "Greedy decoding");
  sample->add_flag("--no-ema", sample_args.no_ema, "Sample with live weights instead of EMA");
  sample->add_option("--seed", sample_args.seed, "Sampling seed");
  sample->add_option("--out", sample_args.out, "Output run directory");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Reconstruction and generation metrics");
  eval->add_option("--ckpt", eval_args.ckpt, "Checkpoint path")->required();
  eval->add_option("--guidance", eval_args.guidance, "Guidance for the generation pass");
  eval->add_option("--seed", eval_args.seed, "Sampling seed");
  eval->add_option("--out", eval_args.out, "Output run directory");

  DiagnoseArgs diag_args;
  CLI::App* diag = app.add_subcommand("diagnose", "Codebook usage and latent collapse report");
  diag->add_option("--ckpt", diag_args.ckpt, "Checkpoint path")->required();
  diag->add_option("--out", diag_args.out, "Output run directory");

  OrderingArgs ord_args;
  CLI::App* ord = app.add_subcommand("ordering", "Token-ordering experiment on a frozen tokenizer");
  ord->add_option("--ckpt", ord_args.ckpt, "Trained checkpoint supplying the tokenizer")->required();
  ord->add_option("--order", ord_args.order, "original, reversed, or random")->required();
  ord->add_option("--perm-seed", ord_args.perm_seed, "Seed for the random permutation");
  ord->add_option("--steps", ord_args.steps, "AR training steps (0 = config value)");
  ord->add_option("--out", ord_args.out, "Output run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(train_args);
    if (app.got_subcommand(sample)) return cmd_sample(sample_args);
    if (app.got_subcommand(eval)) return cmd_eval(eval_args);
    if (app.got_subcommand(diag)) return cmd_diagnose(diag_args);
    if (app.got_subcommand(ord)) return cmd_ordering(ord_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
