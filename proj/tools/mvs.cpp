// Command-line front end: data generation, training, evaluation, the
// experiment harnesses, single-pair summaries, gradient checks and the HTTP
// inference service.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "mvs/mvs.hpp"
#include "mvs/service.hpp"

namespace fs = std::filesystem;
using namespace mvs;

namespace {

struct ModelFlags {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t ffn_dim = 64;
  std::size_t blocks = 2;
  std::size_t output_dim = 16;
  std::size_t max_tokens = 16;
  double init_std = 0.02;
  bool no_textual = false;
  bool no_visual = false;
  bool no_interactive = false;

  void add_to(CLI::App& app, bool attention_flags = true) {
    app.add_option("--embed-dim", embed_dim, "Token embedding width E_s")->capture_default_str();
    app.add_option("--hidden-dim", hidden_dim, "Q/K/V width H_s")->capture_default_str();
    app.add_option("--ffn-dim", ffn_dim, "Feed-forward hidden width")->capture_default_str();
    app.add_option("--blocks", blocks, "Number of decoder blocks")->capture_default_str();
    app.add_option("--output-dim", output_dim, "Query representation width")->capture_default_str();
    app.add_option("--max-tokens", max_tokens, "Longest accepted query")->capture_default_str();
    app.add_option("--init-std", init_std, "Std of Gaussian weight init")->capture_default_str();
    if (attention_flags) {
      app.add_flag("--no-textual", no_textual, "Disable textual attention");
      app.add_flag("--no-visual", no_visual, "Disable visual attention");
      app.add_flag("--no-interactive", no_interactive, "Disable the 1x1 convolution");
    }
  }

  ModelConfig config(const Dataset& data, std::uint64_t seed) const {
    ModelConfig c;
    c.controller.vocab_size = data.vocabulary.size();
    c.controller.embed_dim = embed_dim;
    c.controller.hidden_dim = hidden_dim;
    c.controller.ffn_dim = ffn_dim;
    c.controller.num_blocks = blocks;
    c.controller.output_dim = output_dim;
    c.controller.max_tokens = max_tokens;
    c.feature_dim = data.feature_dim;
    c.t_max = data.t_max;
    c.attention = {!no_textual, !no_visual, !no_interactive};
    c.init_std = init_std;
    c.seed = seed;
    return c;
  }
};

struct TrainFlags {
  std::size_t epochs = 10;
  double lr = 1e-4;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::string split = "paper";
  std::string mask = "all_199";
  int threshold = kDefaultSummaryThreshold;
  double beta = 1.0;

  void add_to(CLI::App& app) {
    app.add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app.add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app.add_option("--batch-size", batch_size, "Pairs per mini-batch")->capture_default_str();
    app.add_option("--seed", seed, "Seed for init, shuffling and the split")->capture_default_str();
    app.add_option("--split", split, "paper (60/20/20) or all (train and validate on every pair)")
        ->check(CLI::IsMember({"paper", "all"}))
        ->capture_default_str();
    app.add_option("--mask", mask, "Frames scored by metrics")
        ->check(CLI::IsMember({"all_199", "original_only"}))
        ->capture_default_str();
    app.add_option("--threshold", threshold, "Summary threshold level")
        ->check(CLI::Range(1, 3))
        ->capture_default_str();
    app.add_option("--beta", beta, "F-beta weight")->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.optimizer.learning_rate = lr;
    c.batch_size = batch_size;
    c.seed = seed;
    c.mask = mask_mode_from_string(mask);
    c.threshold = threshold;
    return c;
  }

  DatasetSplit make_split(const Dataset& data) const {
    if (split == "all") return {data.ids(), data.ids(), data.ids()};
    return split_dataset(data.ids(), seed);
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("failed writing " + path.string());
}

int cmd_gen_data(std::size_t pairs, std::uint64_t seed, const fs::path& out, const SyntheticConfig& cfg) {
  auto ds = generate_synthetic(pairs, seed, cfg);
  const fs::path manifest = write_dataset(ds.data, out);
  std::cout << "wrote " << ds.data.pairs.size() << " pairs to " << manifest.string() << '\n';
  return 0;
}

int cmd_train(const fs::path& manifest, const fs::path& out_dir, const ModelFlags& mf, const TrainFlags& tf) {
  const Dataset data = load_dataset(manifest);
  const DatasetSplit split = tf.make_split(data);
  Model model(mf.config(data, tf.seed));
  const TrainConfig tc = tf.config();
  auto result = train(model, data, split.train, split.val, tc, [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " loss " << format_double(r.train_loss) << " val_accuracy "
              << fixed4(r.val_accuracy) << '\n';
  });
  fs::create_directories(out_dir);
  model.save(out_dir / "checkpoint.bin");
  write_trajectory_csv(out_dir / "trajectory.csv", result.trajectory);
  const EvalReport train_rep = evaluate(model, data.select(split.train), tc.mask, tc.threshold, tf.beta);
  write_json(out_dir / "train_report.json",
             {{"best_epoch", result.best_epoch}, {"train", to_json(train_rep)}});
  std::cout << "best epoch " << result.best_epoch << ", train accuracy " << fixed4(train_rep.accuracy)
            << ", train F1 " << fixed4(train_rep.f_beta) << '\n'
            << "checkpoint " << (out_dir / "checkpoint.bin").string() << '\n';
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const std::string& subset,
             const TrainFlags& tf, const fs::path& out) {
  const Dataset data = load_dataset(manifest);
  const Model model = Model::load(checkpoint);
  const DatasetSplit split = tf.make_split(data);
  const auto& ids = subset == "train" ? split.train
                    : subset == "val" ? split.val
                    : subset == "test" ? split.test
                                       : data.ids();
  const EvalReport rep =
      evaluate(model, data.select(ids), mask_mode_from_string(tf.mask), tf.threshold, tf.beta);
  write_json(out, to_json(rep));
  std::cout << subset << ": accuracy " << fixed4(rep.accuracy) << ", F" << tf.beta << " "
            << fixed4(rep.f_beta) << " over " << rep.pairs << " pairs\n";
  return 0;
}

ExperimentSetup make_setup(const Dataset& data, const ModelFlags& mf, const TrainFlags& tf) {
  return {mf.config(data, tf.seed), tf.config(), tf.make_split(data), tf.beta};
}

int cmd_sweep(const fs::path& manifest, const std::string& dims, const ModelFlags& mf, const TrainFlags& tf,
              const fs::path& out) {
  const Dataset data = load_dataset(manifest);
  const auto rows = run_dimension_sweep(data, make_setup(data, mf, tf), parse_sweep_dims(dims));
  std::cout << format_sweep_table(rows);
  write_json(out, to_json(rows));
  return 0;
}

int cmd_ablate(const fs::path& manifest, const ModelFlags& mf, const TrainFlags& tf, const fs::path& out) {
  const Dataset data = load_dataset(manifest);
  const auto rep = run_ablation(data, make_setup(data, mf, tf));
  std::cout << format_ablation_table(rep);
  write_json(out, to_json(rep));
  return 0;
}

int cmd_summarize(const fs::path& checkpoint, const fs::path& manifest, const std::string& query,
                  const std::string& video, int threshold, const std::string& out) {
  const Dataset data = load_dataset(manifest);
  const Model model = Model::load(checkpoint);
  nlohmann::json doc;
  try {
    doc = summarize_document(model, data, query, video, threshold);
  } catch (const ServiceError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    return 1;
  }
  if (out.empty() || out == "-") {
    std::cout << doc.dump() << '\n';
  } else {
    write_json(out, doc);
  }
  return 0;
}

// Toy-sized end-to-end check at a random parameter draw.
int cmd_gradcheck(const std::string& dims, double tolerance, std::uint64_t seed, double step) {
  GradCheckProblem prob = make_gradcheck_problem(dims, seed);
  const auto start = std::chrono::steady_clock::now();
  const GradCheckReport rep = run_gradcheck(prob, tolerance, step);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& [name, err] : rep.max_relative_error) std::cout << name << ' ' << err << '\n';
  std::cout << "parameters " << prob.model.params().scalar_count() << ", worst " << rep.worst << " ("
            << rep.worst_parameter << ", analytic " << rep.worst_analytic << ", numeric "
            << rep.worst_numeric << "), tolerance " << tolerance << ", " << secs << " s: "
            << (rep.pass ? "PASS" : "FAIL") << '\n';
  return rep.pass ? 0 : 1;
}

int cmd_serve(const ServiceConfig& cfg) {
  const auto service = InferenceService::from_config(cfg);
  httplib::Server server;
  service.mount(server);
  std::cout << "serving " << service.dataset().pairs.size() << " videos on http://" << cfg.host << ':'
            << cfg.port << std::endl;
  if (!server.listen(cfg.host, cfg.port)) {
    std::cerr << "error: cannot listen on " << cfg.host << ':' << cfg.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-conditioned frame-level video summarization"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset (manifest, vocabulary, features)");
  std::size_t gen_pairs = 8;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data";
  SyntheticConfig syn;
  gen->add_option("--pairs", gen_pairs, "Number of query-video pairs")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen->add_option("--feature-dim", syn.feature_dim, "Frame feature width")->capture_default_str();
  gen->add_option("--topics", syn.num_topics, "Number of query topics (1-8)")->capture_default_str();
  gen->add_option("--min-frames", syn.min_frames, "Shortest generated video")->capture_default_str();
  gen->add_option("--noise", syn.noise, "Feature noise std")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoint.bin and trajectory.csv");
  std::string manifest = "data/manifest.json";
  std::string out_dir = "run";
  ModelFlags mf;
  TrainFlags tf;
  tf.split = "all";
  tr->add_option("--manifest", manifest, "Dataset manifest")->capture_default_str();
  tr->add_option("--out", out_dir, "Output directory")->capture_default_str();
  mf.add_to(*tr);
  tf.add_to(*tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; writes an EvalReport");
  std::string checkpoint = "run/checkpoint.bin";
  std::string subset = "test";
  std::string eval_out = "run/eval_report.json";
  TrainFlags ef;
  ef.split = "all";
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->capture_default_str();
  ev->add_option("--manifest", manifest, "Dataset manifest")->capture_default_str();
  ev->add_option("--subset", subset, "Which part of the split to score")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  ev->add_option("--out", eval_out, "Report path")->capture_default_str();
  ef.add_to(*ev);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train/evaluate one model per output dimension");
  std::string dims = "10,150,300";
  std::string sweep_out = "sweep_report.json";
  ModelFlags smf;
  TrainFlags stf;
  sw->add_option("--manifest", manifest, "Dataset manifest")->capture_default_str();
  sw->add_option("--dims", dims, "Comma-separated output dims; 'default' means embed-dim")->capture_default_str();
  sw->add_option("--out", sweep_out, "Report path")->capture_default_str();
  smf.add_to(*sw);
  stf.add_to(*sw);

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train/evaluate the six attention configurations");
  std::string ablate_out = "ablation_report.json";
  ModelFlags amf;
  TrainFlags atf;
  ab->add_option("--manifest", manifest, "Dataset manifest")->capture_default_str();
  ab->add_option("--out", ablate_out, "Report path")->capture_default_str();
  amf.add_to(*ab, false);
  atf.add_to(*ab);

  // summarize
  auto* su = app.add_subcommand("summarize", "Score one (query, video) pair; prints a SummaryResult");
  std::string query;
  std::string video;
  int threshold = kDefaultSummaryThreshold;
  std::string summary_out;
  su->add_option("--checkpoint", checkpoint, "Model checkpoint")->capture_default_str();
  su->add_option("--manifest", manifest, "Dataset manifest")->capture_default_str();
  su->add_option("--query", query, "Text query")->required();
  su->add_option("--video", video, "Video id from the manifest")->required();
  su->add_option("--threshold", threshold, "Summary threshold level")->check(CLI::Range(1, 3))->capture_default_str();
  su->add_option("--out", summary_out, "Write the document here instead of stdout");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare autodiff with central differences end to end");
  std::string gc_dims = "toy";
  double tolerance = 1e-4;
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-5;
  gc->add_option("--dims", gc_dims, "toy or small")->check(CLI::IsMember({"toy", "small"}))->capture_default_str();
  gc->add_option("--tolerance", tolerance, "Max relative error")->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed for parameters and inputs")->capture_default_str();
  gc->add_option("--step", gc_step, "Central-difference step")->capture_default_str();

  // serve
  auto* se = app.add_subcommand("serve", "Run the HTTP inference service");
  ServiceConfig scfg;
  scfg.checkpoint = "run/checkpoint.bin";
  scfg.manifest = "data/manifest.json";
  se->add_option("--checkpoint", scfg.checkpoint, "Model checkpoint")->capture_default_str();
  se->add_option("--manifest", scfg.manifest, "Dataset manifest")->capture_default_str();
  se->add_option("--host", scfg.host, "Listen address")->capture_default_str();
  se->add_option("--port", scfg.port, "Listen port")->check(CLI::Range(1, 65535))->capture_default_str();
  se->add_option("--threshold", scfg.threshold, "Default summary threshold")->check(CLI::Range(1, 3))->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_pairs, gen_seed, gen_out, syn);
    if (tr->parsed()) return cmd_train(manifest, out_dir, mf, tf);
    if (ev->parsed()) return cmd_eval(checkpoint, manifest, subset, ef, eval_out);
    if (sw->parsed()) return cmd_sweep(manifest, dims, smf, stf, sweep_out);
    if (ab->parsed()) return cmd_ablate(manifest, amf, atf, ablate_out);
    if (su->parsed()) return cmd_summarize(checkpoint, manifest, query, video, threshold, summary_out);
    if (gc->parsed()) return cmd_gradcheck(gc_dims, tolerance, gc_seed, gc_step);
    if (se->parsed()) return cmd_serve(scfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
