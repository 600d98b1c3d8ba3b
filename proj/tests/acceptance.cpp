// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. Usage: mvs_acceptance <path-to-mvs-cli> [workdir]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mvs/mvs.hpp"
#include "mvs/service.hpp"

namespace fs = std::filesystem;
using namespace mvs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

std::string fix(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

class Cli {
 public:
  Cli(fs::path exe, fs::path work) : exe_(std::move(exe)), work_(std::move(work)) {}

  // Runs `mvs <args>` inside the work dir; stdout/stderr go to a log.
  bool run(const std::string& args, const std::string& log) const {
    const std::string cmd = "cd " + quote(work_.string()) + " && " + quote(exe_.string()) + " " + args +
                            " > " + quote((work_ / log).string()) + " 2>&1";
    return std::system(cmd.c_str()) == 0;
  }

  const fs::path& work() const { return work_; }

 private:
  fs::path exe_;
  fs::path work_;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<double> trajectory_losses(const fs::path& csv) {
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<double> out;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string epoch, loss;
    std::getline(ss, epoch, ',');
    std::getline(ss, loss, ',');
    out.push_back(std::stod(loss));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  GradCheckProblem prob = make_gradcheck_problem("toy", 0);
  const GradCheckReport rep = run_gradcheck(prob, 1e-4);
  const double secs = seconds_since(t0);
  return {rep.pass && secs < 60.0,
          "max rel err " + sci(rep.worst) + " (" + rep.worst_parameter + ") over " +
              std::to_string(prob.model.params().scalar_count()) + " scalars, tol 1e-4, " + fix(secs, 2) +
              " s (< 60 s)"};
}

Outcome causality() {
  ModelConfig cfg;
  cfg.controller.vocab_size = 64;
  cfg.init_std = 0.5;
  cfg.seed = 11;
  Model model(cfg);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> tok(0, 63);
  std::uniform_int_distribution<std::size_t> len(2, cfg.controller.max_tokens);
  double worst = 0.0;
  std::size_t checks = 0;
  for (int seq = 0; seq < 50; ++seq) {
    TokenSequence a;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) a.ids.push_back(tok(rng));
    const Tensor ha = contextualize(a, model.controller(), cfg.controller).value();
    for (std::size_t cut = 1; cut < n; ++cut) {
      TokenSequence b = a;
      for (std::size_t i = cut; i < n; ++i) b.ids[i] = (a.ids[i] + 1 + tok(rng) % 63) % 64;
      const Tensor hb = contextualize(b, model.controller(), cfg.controller).value();
      for (std::size_t r = 0; r < cut; ++r)
        for (std::size_t c = 0; c < ha.cols(); ++c) worst = std::max(worst, std::abs(ha.at(r, c) - hb.at(r, c)));
      ++checks;
    }
  }
  return {worst <= 1e-12, "50 sequences, " + std::to_string(checks) + " suffix perturbations, max prefix drift " +
                              sci(worst) + " (<= 1e-12)"};
}

Outcome normalization() {
  ModelConfig cfg;
  cfg.controller.vocab_size = 64;
  cfg.init_std = 0.5;
  cfg.seed = 21;
  Model model(cfg);
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::size_t> tok(0, 63);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Var unit_gain = Var::constant(Tensor({cfg.controller.embed_dim}, 1.0));
  const Var zero_bias = Var::constant(Tensor({cfg.controller.embed_dim}, 0.0));

  double softmax_err = 0.0, ln_mean = 0.0, replay_err = 0.0;
  double gate_min = 1.0, gate_max = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    TokenSequence t;
    for (int i = 0; i < 2 + trial % 15; ++i) t.ids.push_back(tok(rng));
    // Replays the decoder stack op by op to expose its intermediates.
    Var h = embed(t, model.controller().token_embedding);
    for (const auto& blk : model.controller().blocks) {
      Var q = linear(h, blk.w_q, blk.b_q);
      Var k = linear(h, blk.w_k);
      Var v = linear(h, blk.w_v, blk.b_v);
      Var probs = softmax_rows(causal_mask(scale(matmul_transposed(q, k), 1.0 / std::sqrt(double(q.value().cols())))));
      for (std::size_t r = 0; r < probs.value().rows(); ++r) {
        double s = 0.0;
        for (double p : probs.value().row(r)) s += p;
        softmax_err = std::max(softmax_err, std::abs(s - 1.0));
      }
      Var residual = add(h, linear(matmul(probs, v), blk.w_o, blk.b_o));
      Tensor pre_affine = layer_norm(residual, unit_gain, zero_bias).value();
      for (std::size_t r = 0; r < pre_affine.rows(); ++r) {
        double m = 0.0;
        for (double x : pre_affine.row(r)) m += x;
        ln_mean = std::max(ln_mean, std::abs(m / double(pre_affine.cols())));
      }
      Var normed = layer_norm(residual, blk.ln_gain, blk.ln_bias);
      h = add(normed, linear(gelu(linear(normed, blk.w_1, blk.b_1)), blk.w_2, blk.b_2));
    }
    replay_err = std::max(replay_err, max_abs_diff(h.value(), contextualize(t, model.controller(), cfg.controller).value()));

    Var f = linear(select_row(h, t.ids.size() - 1), model.controller().w_proj, model.controller().b_proj);
    Tensor textual = sigmoid(linear(f, model.controller().w_ta, model.controller().b_ta)).value();
    Tensor frames({199, cfg.feature_dim});
    for (auto& x : frames.data()) x = 3.0 * normal(rng);
    Tensor visual = sigmoid(linear(Var::constant(frames), model.visual().w_va, model.visual().b_va)).value();
    for (const Tensor* g : {&textual, &visual}) {
      for (double x : g->data()) {
        gate_min = std::min(gate_min, x);
        gate_max = std::max(gate_max, x);
      }
    }
  }
  const bool ok = softmax_err <= 1e-9 && gate_min > 0.0 && gate_max < 1.0 && ln_mean <= 1e-9 && replay_err == 0.0;
  return {ok, "softmax |row sum - 1| " + sci(softmax_err) + " (<= 1e-9), gates in [" + sci(gate_min) + ", 1 - " +
                  sci(1.0 - gate_max) + "] inside (0,1), layer-norm |row mean| " + sci(ln_mean) + " (<= 1e-9)"};
}

Outcome closed_form_loss() {
  const double uniform = cross_entropy(Var::constant(Tensor({199, 4}, 0.0)), std::vector<int>(199, 0)).value().item();
  const std::vector<int> zero{0};
  const double peaked = cross_entropy(Var::constant(Tensor::matrix({{2, 0, 0, 0}})), zero).value().item();
  const double e1 = std::abs(uniform - std::log(4.0));
  const double e2 = std::abs(peaked - (-2.0 + std::log(std::exp(2.0) + 3.0)));
  return {e1 <= 1e-12 && e2 <= 1e-9,
          "uniform vs ln 4: " + sci(e1) + " (<= 1e-12), [2,0,0,0]/0 vs -2+ln(e^2+3): " + sci(e2) + " (<= 1e-9)"};
}

// Trains through the CLI; the checkpoint is reused by later criteria.
Outcome overfit(const Cli& cli) {
  if (!cli.run("gen-data --pairs 8 --seed 7 --out overfit_data", "overfit_gen.log")) return {false, "gen-data failed"};
  const auto t0 = Clock::now();
  if (!cli.run("train --manifest overfit_data/manifest.json --out overfit_run --epochs 300 --lr 1e-3 --split all",
               "overfit_train.log")) {
    return {false, "train failed, see overfit_train.log"};
  }
  const double secs = seconds_since(t0);
  const auto report = read_json(cli.work() / "overfit_run/train_report.json");
  const double acc = report["train"]["accuracy"].get<double>();
  const double loss = report["train"]["loss"].get<double>();
  const double last_epoch = trajectory_losses(cli.work() / "overfit_run/trajectory.csv").back();
  const bool ok = acc >= 0.95 && loss < 0.1 && last_epoch < 0.1 && secs < 300.0;
  return {ok, "train accuracy " + fix(acc) + " (>= 0.95), final loss " + sci(loss) + " / last epoch " +
                  sci(last_epoch) + " (< 0.1), " + fix(secs, 1) + " s (< 300 s)"};
}

Outcome query_dependence(const Cli& cli) {
  const Dataset data = load_dataset(cli.work() / "overfit_data/manifest.json");
  const Model model = Model::load(cli.work() / "overfit_run/checkpoint.bin");
  // v01 and v02 carry different topics, hence different relevance signatures.
  const QueryVideoPair& a = *data.find("v01");
  const QueryVideoPair& b = *data.find("v02");
  const auto sa = model.summarize(a.tokens, a.frames).selected_frames;
  const auto sb = model.summarize(b.tokens, a.frames).selected_frames;
  std::vector<std::size_t> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(diff));
  return {diff.size() >= 10, "video v01 with \"" + a.query + "\" vs \"" + b.query + "\": " +
                                 std::to_string(diff.size()) + " differing selected frames (>= 10)"};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> level(0, 3);
  std::uniform_int_distribution<std::size_t> len(1, 199);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double acc_err = 0.0, f_err = 0.0;
  std::size_t empties = 0;

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> raw(len(rng));
    for (auto& l : raw) l = level(rng);
    RelevanceLabels gt = repeat_labels(raw);
    std::vector<int> pred(199);
    for (auto& l : pred) l = level(rng);
    for (MaskMode mode : {MaskMode::all_frames, MaskMode::original_only}) {
      const std::size_t n = mode == MaskMode::all_frames ? 199 : raw.size();
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) hits += pred[i] == gt.labels[i];
      acc_err = std::max(acc_err, std::abs(accuracy(pred, gt, mode) - double(hits) / double(n)));
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    const double beta = trial % 2 ? 1.0 : 0.25 + 2.0 * unit(rng);
    std::vector<SelectionPair> pairs;
    double oracle = 0.0;
    for (int k = 0; k < 5; ++k) {
      std::vector<bool> in_pred(60), in_gt(60);
      const double dp = (trial + k) % 6 == 0 ? 0.0 : unit(rng);
      const double dg = (trial + 2 * k) % 7 == 0 ? 0.0 : unit(rng);
      SelectionPair s;
      for (std::size_t f = 0; f < 60; ++f) {
        in_pred[f] = unit(rng) < dp;
        in_gt[f] = unit(rng) < dg;
        if (in_pred[f]) s.predicted.push_back(f);
        if (in_gt[f]) s.ground_truth.push_back(f);
      }
      empties += s.predicted.empty() || s.ground_truth.empty();
      double tp = 0, np = 0, ng = 0;
      for (std::size_t f = 0; f < 60; ++f) {
        tp += in_pred[f] && in_gt[f];
        np += in_pred[f];
        ng += in_gt[f];
      }
      const double p = np == 0 ? 0.0 : tp / np;
      const double r = ng == 0 ? (np == 0 ? 1.0 : 0.0) : tp / ng;
      const double b2 = beta * beta;
      oracle += p + r == 0 ? 0.0 : (1 + b2) * p * r / (b2 * p + r);
      pairs.push_back(std::move(s));
    }
    oracle /= double(pairs.size());
    f_err = std::max(f_err, std::abs(f_beta(std::span<const SelectionPair>(pairs), beta) - oracle));
  }

  std::vector<int> gt(199), pred(199);
  for (std::size_t i = 0; i < 199; ++i) {
    gt[i] = int(i % 4);
    pred[i] = i < 144 ? gt[i] : (gt[i] + 2) % 4;
  }
  const double fig = accuracy(pred, RelevanceLabels{gt, 199});
  const bool ok = acc_err <= 1e-12 && f_err <= 1e-12 && std::abs(fig - 0.7236) <= 5e-5 && empties > 0;
  return {ok, "accuracy vs counting oracle " + sci(acc_err) + ", F-beta vs brute force " + sci(f_err) +
                  " (<= 1e-12, 100 cases each, " + std::to_string(empties) + " empty-selection pairs), 144/199 = " +
                  fix(fig, 6)};
}

Outcome ablation(const Cli& cli) {
  if (!cli.run("gen-data --pairs 10 --seed 3 --out exp_data", "exp_gen.log")) return {false, "gen-data failed"};
  if (!cli.run("ablate --manifest exp_data/manifest.json --epochs 5 --lr 1e-3 --out ablation.json", "ablate.log")) {
    return {false, "ablate failed, see ablate.log"};
  }
  const auto rep = read_json(cli.work() / "ablation.json");
  const auto& groups = rep["groups"];
  bool same = true;
  for (const auto& g : groups) same = same && g["without"] == rep["baseline"];
  const std::string table = slurp(cli.work() / "ablate.log");
  const bool shaped = groups.size() == 5 && table.find("Interactive-Visual-Textual Attention") != std::string::npos &&
                      table.find("w/o") != std::string::npos;
  return {shaped && same, std::to_string(groups.size() + 1) + " configurations, table emitted: " +
                              (shaped ? "yes" : "no") + ", baseline identical across groups: " + (same ? "yes" : "no")};
}

Outcome sweep(const Cli& cli) {
  const std::string args = "sweep --manifest exp_data/manifest.json --dims 10,150,300 --epochs 3 --lr 1e-3 --seed 5";
  if (!cli.run(args + " --out sweep_a.json", "sweep_a.log") || !cli.run(args + " --out sweep_b.json", "sweep_b.log")) {
    return {false, "sweep failed, see sweep_a.log"};
  }
  const std::string a = slurp(cli.work() / "sweep_a.json");
  const std::string b = slurp(cli.work() / "sweep_b.json");
  const auto rows = nlohmann::json::parse(a)["rows"];
  bool in_range = true;
  for (const auto& r : rows) {
    const double acc = r["report"]["accuracy"].get<double>();
    in_range = in_range && acc >= 0.0 && acc <= 1.0;
  }
  const bool table = slurp(cli.work() / "sweep_a.log").find("Word Embedding Dimension") != std::string::npos;
  const bool ok = rows.size() == 3 && in_range && table && a == b && slurp(cli.work() / "sweep_a.log") == slurp(cli.work() / "sweep_b.log");
  return {ok, std::to_string(rows.size()) + " rows (10/150/300), table emitted: " + (table ? "yes" : "no") +
                  ", rerun bitwise identical: " + (a == b ? "yes" : "no")};
}

Outcome determinism(const Cli& cli) {
  const std::string args = "train --manifest exp_data/manifest.json --epochs 15 --lr 1e-3 --seed 9";
  if (!cli.run(args + " --out det_a", "det_a.log") || !cli.run(args + " --out det_b", "det_b.log")) {
    return {false, "train failed, see det_a.log"};
  }
  const auto a = trajectory_losses(cli.work() / "det_a/trajectory.csv");
  const auto b = trajectory_losses(cli.work() / "det_b/trajectory.csv");
  double worst = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return {a.size() == 15 && worst <= 1e-12,
          std::to_string(a.size()) + " epochs, max per-epoch loss difference " + sci(worst) + " (<= 1e-12)"};
}

Outcome service_parity(const Cli& cli) {
  ServiceConfig cfg;
  cfg.checkpoint = cli.work() / "overfit_run/checkpoint.bin";
  cfg.manifest = cli.work() / "overfit_data/manifest.json";
  InferenceService service = InferenceService::from_config(cfg);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  struct Case {
    std::string query, video;
    int threshold;
  };
  const std::vector<Case> cases{{"sport of snowboarding", "v01", 2}, {"sport of skiing", "v01", 2},
                                {"the sport of surfing video", "v03", 3}, {"cooking", "v04", 1}};
  std::size_t equal = 0;
  std::string detail;
  httplib::Client client("127.0.0.1", port);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const std::string out = "summary_" + std::to_string(i) + ".json";
    const bool cli_ok = cli.run("summarize --checkpoint overfit_run/checkpoint.bin --manifest overfit_data/manifest.json"
                                " --query " + quote(c.query) + " --video " + c.video + " --threshold " +
                                    std::to_string(c.threshold) + " --out " + out,
                                "summarize_" + std::to_string(i) + ".log");
    nlohmann::json body{{"query", c.query}, {"video_id", c.video}, {"threshold", c.threshold}};
    auto res = client.Post("/summarize", body.dump(), "application/json");
    if (!cli_ok || !res || res->status != 200) {
      detail = "request " + std::to_string(i) + " failed";
      continue;
    }
    const auto from_cli = read_json(cli.work() / out);
    const auto from_http = nlohmann::json::parse(res->body);
    bool same = from_cli.size() == from_http.size();
    for (const auto& [key, value] : from_cli.items()) same = same && from_http.contains(key) && from_http[key] == value;
    equal += same;
  }
  server.stop();
  thread.join();
  return {equal == cases.size(), std::to_string(equal) + "/" + std::to_string(cases.size()) +
                                     " POST /summarize responses equal CLI summarize field-for-field" +
                                     (detail.empty() ? "" : " (" + detail + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: mvs_acceptance <mvs-cli> [workdir]\n";
    return 2;
  }
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "mvs_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const Cli cli(fs::absolute(argv[1]), fs::absolute(work));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient_fidelity", gradient_fidelity},
      {"causality", causality},
      {"normalization", normalization},
      {"closed_form_loss", closed_form_loss},
      {"overfit", [&] { return overfit(cli); }},
      {"query_dependence", [&] { return query_dependence(cli); }},
      {"metric_oracles", metric_oracles},
      {"ablation_harness", [&] { return ablation(cli); }},
      {"dimension_sweep", [&] { return sweep(cli); }},
      {"determinism", [&] { return determinism(cli); }},
      {"service_parity", [&] { return service_parity(cli); }},
  };

  std::size_t passed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    passed += o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << std::left << std::setw(18) << name << ' ' << o.detail << std::endl;
  }
  std::cout << passed << '/' << criteria.size() << " criteria passed" << std::endl;
  return passed == criteria.size() ? 0 : 1;
}
