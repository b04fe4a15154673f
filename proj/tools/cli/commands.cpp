#include "commands.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>

#include "bundle.hpp"
#include "heightlab/consistency.hpp"
#include "heightlab/error.hpp"
#include "heightlab/io.hpp"
#include "heightlab/metrics.hpp"
#include "heightlab/parallel.hpp"
#include "heightlab/synth.hpp"
#include "heightlab/toytrain.hpp"
#include "png_render.hpp"

#ifndef HEIGHTLAB_VERSION
#define HEIGHTLAB_VERSION "0.0.0"
#endif

namespace heightlab::cli {
namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data() + pos, text.data() + comma, v);
    if (ec != std::errc() || end != text.data() + comma || !(v > 0.0) || !std::isfinite(v)) {
      throw UsageError("--thresholds expects positive numbers separated by commas");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::pair<int, int> parse_frame_pair(const std::string& text) {
  const std::size_t colon = text.find(':');
  const auto parse = [&](std::string_view s) {
    int v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || v < 0 || s.empty()) {
      throw UsageError("--frames expects a:b with non-negative integers");
    }
    return v;
  };
  if (colon == std::string::npos) throw UsageError("--frames expects a:b");
  return {parse(std::string_view(text).substr(0, colon)), parse(std::string_view(text).substr(colon + 1))};
}

void write_manifest(const fs::path& dir, const std::string& command, json config, json inputs,
                    std::vector<std::string> outputs, std::optional<std::uint64_t> seed) {
  std::sort(outputs.begin(), outputs.end());
  json m = {{"command", command},
            {"tool_version", HEIGHTLAB_VERSION},
            {"config", std::move(config)},
            {"inputs", std::move(inputs)},
            {"outputs", outputs}};
  m["seed"] = seed ? json(*seed) : json(nullptr);
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

json parse_json_file(const fs::path& path, const char* what) {
  const std::string text = read_text_file(path);
  try {
    json doc = json::parse(text);
    if (!doc.is_object()) throw DataError(std::string(what) + ": document must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

// Labelled per-frame reports plus pooled and frame-mean aggregates.
struct ReportSet {
  std::vector<std::pair<std::string, HeightReport>> rows;
  HeightReport pooled;
  HeightReport mean;
};

ReportSet build_reports(const std::vector<std::string>& labels, const std::vector<HeightMap>& pred,
                        const std::vector<HeightMap>& gt, const std::vector<double>& thresholds) {
  ReportSet set;
  std::vector<double> all;
  std::vector<HeightReport> per_frame;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::vector<double> e = height_errors(pred[i], gt[i]);
    per_frame.push_back(report_from_errors(e, thresholds));
    set.rows.emplace_back(labels[i], per_frame.back());
    all.insert(all.end(), e.begin(), e.end());
  }
  set.pooled = report_from_errors(all, thresholds);
  set.mean = mean_report(per_frame);
  return set;
}

std::string reports_csv(const ReportSet& set, const std::vector<double>& thresholds) {
  std::string out = "frame," + csv_header(thresholds) + "\n";
  for (const auto& [label, rep] : set.rows) out += label + "," + csv_line(rep) + "\n";
  out += "pooled," + csv_line(set.pooled) + "\n";
  out += "mean," + csv_line(set.mean) + "\n";
  return out;
}

std::string reports_table(const ReportSet& set) {
  auto rows = set.rows;
  rows.emplace_back("pooled", set.pooled);
  rows.emplace_back("mean", set.mean);
  return format_table(rows);
}

// ----------------------------------------------------------------- gen

struct GenOptions {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenOptions& o, std::ostream& out) {
  json doc = parse_json_file(o.spec, "SceneSpec");
  if (o.seed) doc["seed"] = *o.seed;
  const SceneSpec spec = parse_scene_spec(doc.dump());
  const Scene scene = generate_scene(spec);
  const auto files = write_bundle(scene, o.out);
  write_manifest(o.out, "gen", json::parse(scene_spec_to_json(spec)), {{"spec", o.spec}}, files, spec.seed);
  out << fmt::format("generated {} frame(s) of a {} scene into {}\n", scene.frames.size(),
                     to_string(spec.surface_kind), o.out);
  return kExitOk;
}

// ----------------------------------------------------------------- eval

struct EvalOptions {
  std::string pred;
  std::string gt;
  std::string thresholds = "0.05,0.1,0.2";
  std::string out;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const std::vector<double> thresholds = parse_thresholds(o.thresholds);
  const auto gt_files = list_frames(o.gt, "gt", "hgt");
  auto pred_files = list_frames(o.pred, "pred", "hgt");
  if (pred_files.empty()) pred_files = list_frames(o.pred, "gt", "hgt");
  if (gt_files.empty()) throw DataError("eval: no gt_*.hgt files in '" + o.gt + "'");
  if (pred_files.size() != gt_files.size()) {
    throw DataError(fmt::format("eval: {} prediction(s) but {} ground-truth frame(s)", pred_files.size(),
                                gt_files.size()));
  }
  std::vector<std::string> labels;
  std::vector<HeightMap> pred, gt;
  for (std::size_t i = 0; i < gt_files.size(); ++i) {
    if (pred_files[i].first != gt_files[i].first) {
      throw DataError(fmt::format("eval: prediction frames do not match ground-truth frames (at {:04d})",
                                  gt_files[i].first));
    }
    labels.push_back(fmt::format("{:04d}", gt_files[i].first));
    pred.push_back(read_hgt1(pred_files[i].second));
    gt.push_back(read_hgt1(gt_files[i].second));
    if (!(pred.back().grid() == gt.back().grid())) {
      throw DataError(fmt::format("eval: grid mismatch at frame {:04d}", gt_files[i].first));
    }
  }
  const ReportSet set = build_reports(labels, pred, gt, thresholds);
  out << reports_table(set);
  if (!o.out.empty()) {
    write_text_file(o.out, reports_csv(set, thresholds));
  } else {
    out << "\n" << reports_csv(set, thresholds);
  }
  return kExitOk;
}

// ----------------------------------------------------------------- warp

struct WarpOptions {
  std::string scene;
  std::string heightmap;
  std::string current;
  std::string poses;
  std::string ego_motion;
  std::string frames;
  std::string out;
};

RigidTransform ego_motion_between(const std::vector<RigidTransform>& motion, int a, int b) {
  RigidTransform t;  // ego(hi) <- ego(lo)
  const int lo = std::min(a, b), hi = std::max(a, b);
  for (int k = lo + 1; k <= hi; ++k) t = compose(motion[k], t);
  return a <= b ? t : invert(t);
}

int cmd_warp(const WarpOptions& o, std::ostream& out) {
  const auto [a, b] = parse_frame_pair(o.frames);
  const bool from_scene = !o.scene.empty();
  if (from_scene == !o.heightmap.empty()) throw UsageError("warp: give either --scene or --heightmap");
  if (!from_scene && (o.current.empty() || o.poses.empty() || o.ego_motion.empty())) {
    throw UsageError("warp: --heightmap requires --current, --poses and --ego-motion");
  }
  const fs::path scene_dir = o.scene;
  const fs::path prev_path = from_scene ? scene_dir / frame_file("gt", a, "hgt") : fs::path(o.heightmap);
  const fs::path curr_path = from_scene ? scene_dir / frame_file("gt", b, "hgt") : fs::path(o.current);
  const fs::path poses_path = from_scene ? scene_dir / "poses.txt" : fs::path(o.poses);
  const fs::path motion_path = from_scene ? scene_dir / "ego_motion.txt" : fs::path(o.ego_motion);

  const auto poses = read_poses(poses_path);
  const auto motion = read_poses(motion_path);
  if (motion.size() != poses.size()) throw DataError("warp: pose and ego-motion files differ in length");
  if (a >= static_cast<int>(poses.size()) || b >= static_cast<int>(poses.size())) {
    throw DataError(fmt::format("warp: frames {}:{} outside the {} pose(s) on file", a, b, poses.size()));
  }
  const HeightMap prev = read_hgt1(prev_path);
  const HeightMap curr = read_hgt1(curr_path);
  const RigidTransform t_rel =
      relative_transform(RoadFrame(poses[a], a), RoadFrame(poses[b], b), ego_motion_between(motion, a, b));
  const WarpResult wr = warp_heightmap(prev, t_rel, curr.grid());
  const double loss = consistency_loss(wr.warped, curr, wr.overlap);

  const fs::path dir = o.out;
  ensure_directory(dir);
  write_hgt1(dir / "warped.hgt", wr.warped);
  GroundMask overlap(wr.overlap.rows, wr.overlap.cols);
  std::copy(wr.overlap.mask.begin(), wr.overlap.mask.end(), overlap.data().begin());
  write_pgm(dir / "overlap.pgm", overlap);
  json inputs = {{"heightmap", prev_path.string()},
                 {"current", curr_path.string()},
                 {"poses", poses_path.string()},
                 {"ego_motion", motion_path.string()}};
  write_manifest(dir, "warp", {{"frames", o.frames}}, inputs, {"warped.hgt", "overlap.pgm"}, std::nullopt);
  out << fmt::format("L_Cons = {}\noverlap cells = {}\n", loss, wr.overlap.count());
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainSetup {
  TrainConfig config;
  int holdout_frames = 1;
  std::vector<double> slopes = default_slopes();
  std::vector<double> thresholds = default_thresholds();
};

TrainSetup parse_train_setup(const json& doc) {
  static const std::set<std::string> known = {"learning_rate", "steps",         "batch_frames",
                                              "loss_weights",  "seed",          "init_scale",
                                              "consistency_against_gt", "holdout_frames", "slopes",
                                              "thresholds"};
  for (const auto& [key, unused] : doc.items()) {
    if (!known.contains(key)) throw DataError("train config: unknown key '" + key + "'");
  }
  TrainSetup s;
  try {
    TrainConfig& c = s.config;
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.steps = doc.value("steps", c.steps);
    c.batch_frames = doc.value("batch_frames", c.batch_frames);
    c.seed = doc.value("seed", c.seed);
    c.init_scale = doc.value("init_scale", c.init_scale);
    c.consistency_against_gt = doc.value("consistency_against_gt", c.consistency_against_gt);
    if (doc.contains("loss_weights")) {
      const json& lw = doc.at("loss_weights");
      for (const auto& [key, unused] : lw.items()) {
        if (key != "lambda_sa" && key != "lambda_cons" && key != "lambda_h") {
          throw DataError("train config: unknown loss weight '" + key + "'");
        }
      }
      c.loss_weights.lambda_sa = lw.value("lambda_sa", c.loss_weights.lambda_sa);
      c.loss_weights.lambda_cons = lw.value("lambda_cons", c.loss_weights.lambda_cons);
      c.loss_weights.lambda_h = lw.value("lambda_h", c.loss_weights.lambda_h);
    }
    s.holdout_frames = doc.value("holdout_frames", s.holdout_frames);
    s.slopes = doc.value("slopes", s.slopes);
    s.thresholds = doc.value("thresholds", s.thresholds);
  } catch (const json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  if (s.holdout_frames < 0) throw InvalidArgument("train config: holdout_frames must be >= 0");
  for (double t : s.thresholds) {
    if (!(t > 0.0)) throw InvalidArgument("train config: thresholds must be positive");
  }
  s.config.validate();
  return s;
}

json train_setup_json(const TrainSetup& s) {
  const TrainConfig& c = s.config;
  return {{"learning_rate", c.learning_rate},
          {"steps", c.steps},
          {"batch_frames", c.batch_frames},
          {"loss_weights",
           {{"lambda_sa", c.loss_weights.lambda_sa},
            {"lambda_cons", c.loss_weights.lambda_cons},
            {"lambda_h", c.loss_weights.lambda_h}}},
          {"seed", c.seed},
          {"init_scale", c.init_scale},
          {"consistency_against_gt", c.consistency_against_gt},
          {"holdout_frames", s.holdout_frames},
          {"slopes", s.slopes},
          {"thresholds", s.thresholds}};
}

struct TrainOptions {
  std::string config;
  std::vector<std::string> scenes;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  TrainSetup setup = parse_train_setup(parse_json_file(o.config, "train config"));
  if (o.seed) setup.config.seed = *o.seed;

  std::vector<LoadedScene> scenes;
  for (const std::string& dir : o.scenes) scenes.push_back(load_bundle(dir));
  const BevGrid grid = scenes.front().spec.grid;
  const SlopeAnchorSet anchors = make_anchor_set(grid, setup.slopes);

  TrainBatch batch{anchors, {}};
  std::vector<TrainFrame> eval_frames;
  std::vector<std::string> eval_labels;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const LoadedScene& s = scenes[si];
    if (!(s.spec.grid == grid) || s.spec.channels != scenes.front().spec.channels) {
      throw DataError("train: all scenes must share the grid and channel count");
    }
    const int n_train = s.size() - setup.holdout_frames;
    if (n_train < 1) throw DataError(fmt::format("train: scene '{}' has no frames left for training", o.scenes[si]));
    const int count = setup.config.batch_frames > 0 ? std::min(setup.config.batch_frames, n_train) : n_train;
    const CameraModel cam = s.camera();
    const auto frame = [&](int k) {
      return prepare_frame(anchors, cam, s.frames[k], s.features[k], s.masks[k], s.ground_truth[k]);
    };
    std::vector<TrainFrame> frames;
    for (int k = 0; k < count; ++k) frames.push_back(frame(k));
    batch.sequences.push_back(
        make_sequence(std::move(frames), std::span(s.ego_motion).subspan(0, static_cast<std::size_t>(count))));
    const int eval_first = setup.holdout_frames > 0 ? n_train : 0;
    const int eval_end = setup.holdout_frames > 0 ? s.size() : count;
    for (int k = eval_first; k < eval_end; ++k) {
      eval_frames.push_back(frame(k));
      eval_labels.push_back(fmt::format("s{:02d}/{:04d}", si, k));
    }
  }

  const TrainResult result = train(setup.config, batch);

  std::vector<HeightMap> trained, baseline, gt;
  const PredictorParams zero = PredictorParams::zeros(result.params.channels(), result.params.anchors());
  for (const TrainFrame& f : eval_frames) {
    trained.push_back(predict_heightmap(result.params, anchors, f));
    baseline.push_back(predict_heightmap(zero, anchors, f));
    gt.push_back(f.ground_truth);
  }
  const ReportSet trained_set = build_reports(eval_labels, trained, gt, setup.thresholds);
  const ReportSet baseline_set = build_reports(eval_labels, baseline, gt, setup.thresholds);

  const fs::path dir = o.out;
  ensure_directory(dir);
  write_params(dir / "params.prm", result.params);
  write_text_file(dir / "trace.csv", trace_csv(result.trace));
  write_text_file(dir / "report.csv", reports_csv(trained_set, setup.thresholds));
  write_text_file(dir / "baseline_report.csv", reports_csv(baseline_set, setup.thresholds));
  write_manifest(dir, "train", train_setup_json(setup), {{"config", o.config}, {"scenes", o.scenes}},
                 {"params.prm", "trace.csv", "report.csv", "baseline_report.csv"}, setup.config.seed);

  out << fmt::format("loss {:.6f} -> {:.6f} over {} step(s)\n", result.trace.front().total,
                     result.trace.back().total, result.trace.size());
  out << fmt::format("held-out MAE: trained {:.4f} m, uniform baseline {:.4f} m\n", trained_set.pooled.mae,
                     baseline_set.pooled.mae);
  out << reports_table(trained_set);
  return kExitOk;
}

// ----------------------------------------------------------------- predict

struct PredictOptions {
  std::string params;
  std::string scene;
  std::string out;
  std::string config;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  std::vector<double> slopes = default_slopes();
  if (!o.config.empty()) slopes = parse_train_setup(parse_json_file(o.config, "train config")).slopes;
  const PredictorParams params = read_params(o.params);
  const LoadedScene s = load_bundle(o.scene);
  const SlopeAnchorSet anchors = make_anchor_set(s.spec.grid, slopes);
  if (params.anchors() != anchors.size()) throw DataError("predict: parameter anchor count does not match the slopes");

  const fs::path dir = o.out;
  ensure_directory(dir);
  std::vector<std::string> files;
  const CameraModel cam = s.camera();
  for (int k = 0; k < s.size(); ++k) {
    const TrainFrame f = prepare_frame(anchors, cam, s.frames[k], s.features[k], s.masks[k], s.ground_truth[k]);
    files.push_back(frame_file("pred", k, "hgt"));
    write_hgt1(dir / files.back(), predict_heightmap(params, anchors, f));
  }
  write_manifest(dir, "predict", {{"slopes", slopes}}, {{"params", o.params}, {"scene", o.scene}}, files,
                 std::nullopt);
  out << fmt::format("wrote {} prediction(s) to {}\n", files.size(), o.out);
  return kExitOk;
}

// ----------------------------------------------------------------- render

int cmd_render(const std::string& heightmap, const std::string& png, std::ostream& out) {
  const HeightMap map = read_hgt1(heightmap);
  write_png(png, render_heightmap(map));
  out << fmt::format("wrote {}\n", png);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"heightlab: slope-aware road heightmap toolkit"};
  app.set_version_flag("--version", HEIGHTLAB_VERSION);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = default, capped by HEIGHTLAB_THREADS)")
      ->check(CLI::NonNegativeNumber);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene bundle");
  gen_cmd->add_option("--spec", gen.spec, "SceneSpec JSON")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the spec seed");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predicted heightmaps against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "Directory with pred_%04d.hgt (or gt_%04d.hgt)")->required();
  eval_cmd->add_option("--gt", eval.gt, "Directory with gt_%04d.hgt")->required();
  eval_cmd->add_option("--thresholds", eval.thresholds, "Acc thresholds in meters")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "CSV report path");

  WarpOptions warp;
  auto* warp_cmd = app.add_subcommand("warp", "Ego-motion-compensate a heightmap into another frame");
  warp_cmd->add_option("--scene", warp.scene, "Scene bundle (uses gt maps, poses.txt, ego_motion.txt)");
  warp_cmd->add_option("--heightmap", warp.heightmap, "Heightmap of frame a");
  warp_cmd->add_option("--current", warp.current, "Heightmap of frame b");
  warp_cmd->add_option("--poses", warp.poses, "Pose file (road <- ego per frame)");
  warp_cmd->add_option("--ego-motion", warp.ego_motion, "Ego-motion file (ego(k) <- ego(k-1))");
  warp_cmd->add_option("--frames", warp.frames, "Frame pair a:b")->required();
  warp_cmd->add_option("--out", warp.out, "Output directory")->required();

  TrainOptions trn;
  auto* train_cmd = app.add_subcommand("train", "Train the slope-weight predictor");
  train_cmd->add_option("--config", trn.config, "Training config JSON")->required();
  train_cmd->add_option("--scenes", trn.scenes, "Scene bundle directories")->required()->expected(1, -1);
  train_cmd->add_option("--out", trn.out, "Output directory")->required();
  train_cmd->add_option("--seed", trn.seed, "Override the config seed");

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predict heightmaps for a scene bundle");
  pred_cmd->add_option("--params", pred.params, "PRM1 parameter file")->required();
  pred_cmd->add_option("--scene", pred.scene, "Scene bundle")->required();
  pred_cmd->add_option("--out", pred.out, "Output directory")->required();
  pred_cmd->add_option("--config", pred.config, "Training config JSON (for the slope set)");

  std::string render_in, render_out;
  auto* render_cmd = app.add_subcommand("render", "Render a heightmap to a color-mapped PNG");
  render_cmd->add_option("--heightmap", render_in, "HGT1 heightmap")->required();
  render_cmd->add_option("--out", render_out, "PNG path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    set_worker_count(static_cast<std::size_t>(threads));
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*warp_cmd) return cmd_warp(warp, out);
    if (*train_cmd) return cmd_train(trn, out);
    if (*pred_cmd) return cmd_predict(pred, out);
    if (*render_cmd) return cmd_render(render_in, render_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}

}  // namespace heightlab::cli
