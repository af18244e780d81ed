// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: synthetic data generation, pair construction,
// pre-training, correspondence training, evaluation, and the non-learned
// baselines. Run with --help for the full flag reference.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "awe/config_file.hpp"
#include "awe/evaluate.hpp"
#include "awe/pairs.hpp"
#include "awe/synth.hpp"
#include "awe/trainer.hpp"

namespace fs = std::filesystem;
using namespace awe;

namespace {

// Shortest round-trip decimal; integral values keep one fractional digit so
// report lines read as numbers ("100.0", not "100").
std::string format_metric(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stoull(tok));
  if (out.empty()) throw std::runtime_error("empty seed list");
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration files

struct RunSpec {
  train::TrainConfig config;
  std::string data;
  std::string val_data;
  std::string pairs;
  std::string init;
  std::string resume;
  std::string out;
  std::string metrics;
};

std::size_t to_size(const std::string& v, const std::string& key) {
  try {
    return std::stoul(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config key '" + key + "': expected true/false, got '" + v + "'");
}

RunSpec load_run_spec(const std::string& path) {
  RunSpec spec;
  bool saw_model = false, saw_out = false, saw_epochs = false;
  for (const auto& [key, value] : parse_config_file(path)) {
    if (key == "model") {
      spec.config.kind = train::model_kind_from(value);
      saw_model = true;
    } else if (key == "data") spec.data = value;
    else if (key == "val_data") spec.val_data = value;
    else if (key == "pairs") spec.pairs = value;
    else if (key == "init") spec.init = value;
    else if (key == "resume") spec.resume = value;
    else if (key == "out") { spec.out = value; saw_out = true; }
    else if (key == "metrics") spec.metrics = value;
    else if (key == "learning_rate") spec.config.learning_rate = to_double(value, key);
    else if (key == "batch_size") spec.config.batch_size = to_size(value, key);
    else if (key == "max_epochs") { spec.config.max_epochs = to_size(value, key); saw_epochs = true; }
    else if (key == "eval_every") spec.config.eval_every = to_size(value, key);
    else if (key == "seed") spec.config.seed = std::stoull(value);
    else if (key == "sigma2") spec.config.loss.sigma2 = to_double(value, key);
    else if (key == "kl_weight") spec.config.loss.kl_weight = to_double(value, key);
    else if (key == "K") spec.config.loss.K = to_size(value, key);
    else if (key == "margin") spec.config.loss.margin = to_double(value, key);
    else if (key == "anneal_k") spec.config.anneal.k = to_double(value, key);
    else if (key == "anneal_s0") spec.config.anneal.s0 = to_double(value, key);
    else if (key == "feat_dim") spec.config.feat_dim = to_size(value, key);
    else if (key == "hidden_dim") spec.config.hidden_dim = to_size(value, key);
    else if (key == "latent_dim") spec.config.latent_dim = to_size(value, key);
    else if (key == "num_layers") spec.config.num_layers = to_size(value, key);
    else if (key == "decoder_bidirectional") spec.config.decoder_bidirectional = to_bool(value, key);
    else if (key == "grad_clip") spec.config.grad_clip = to_double(value, key);
    else if (key == "threads") spec.config.threads = to_size(value, key);
    else throw std::runtime_error("unknown config key '" + key + "' in " + path);
  }
  if (!saw_model) throw std::runtime_error("config " + path + ": missing required key 'model'");
  if (spec.data.empty()) throw std::runtime_error("config " + path + ": missing required key 'data'");
  if (!saw_out) throw std::runtime_error("config " + path + ": missing required key 'out'");
  if (!saw_epochs) throw std::runtime_error("config " + path + ": missing required key 'max_epochs'");
  return spec;
}

struct RunOutcome {
  double val_ap = -1.0;
  std::string out_path;
};

RunOutcome execute_run(RunSpec spec, bool pretrain_command, const std::string& out_path) {
  Dataset data = load_dataset(spec.data);
  std::optional<Dataset> val;
  if (!spec.val_data.empty()) val = load_dataset(spec.val_data);

  std::optional<train::Checkpoint> init;
  if (!spec.init.empty()) init = train::load_checkpoint(spec.init);
  std::optional<train::Checkpoint> resume;
  if (!spec.resume.empty()) resume = train::load_checkpoint(spec.resume);

  std::ofstream metrics_file;
  std::ostream* metrics = nullptr;
  if (!spec.metrics.empty()) {
    metrics_file.open(spec.metrics, std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("cannot write metrics log " + spec.metrics);
    metrics = &metrics_file;
  }

  train::Checkpoint result;
  if (pretrain_command) {
    if (spec.config.kind != train::ModelKind::vae)
      throw std::runtime_error("pretrain runs the vae model; config says '" +
                               train::to_string(spec.config.kind) + "'");
    result = train::pretrain_vae(spec.config, data, val ? &*val : nullptr, metrics,
                                 resume ? &*resume : nullptr);
  } else {
    if (spec.config.kind == train::ModelKind::vae)
      throw std::runtime_error("train runs the correspondence models; use pretrain for vae");
    PairList pairs;
    if (spec.config.kind != train::ModelKind::ae) {
      if (spec.pairs.empty())
        throw std::runtime_error("config: missing required key 'pairs' for model " +
                                 train::to_string(spec.config.kind));
      pairs = load_pairs(spec.pairs, data);
    }
    result = train::train_correspondence(spec.config, data, pairs, val ? &*val : nullptr,
                                         init ? &*init : nullptr, metrics,
                                         resume ? &*resume : nullptr);
  }
  train::save_checkpoint(out_path, result);
  RunOutcome outcome;
  outcome.val_ap = result.best_val_ap;
  outcome.out_path = out_path;
  return outcome;
}

int run_training_command(const std::string& config_path, const std::string& seeds_text,
                         bool pretrain_command) {
  RunSpec base = load_run_spec(config_path);
  if (seeds_text.empty()) {
    RunOutcome out = execute_run(base, pretrain_command, base.out);
    std::cout << "checkpoint " << out.out_path << "\n";
    if (out.val_ap >= 0.0) std::cout << "best_val_ap " << format_metric(out.val_ap) << "\n";
    return 0;
  }
  // Seed sweep: one run per seed, validation APs aggregated as mean and
  // standard deviation.
  const auto seeds = parse_seed_list(seeds_text);
  std::vector<double> aps;
  for (std::uint64_t seed : seeds) {
    RunSpec spec = base;
    spec.config.seed = seed;
    const std::string out_path = base.out + ".seed" + std::to_string(seed);
    if (!base.metrics.empty()) spec.metrics = base.metrics + ".seed" + std::to_string(seed);
    RunOutcome out = execute_run(spec, pretrain_command, out_path);
    std::cout << "seed " << seed << " checkpoint " << out.out_path;
    if (out.val_ap >= 0.0) std::cout << " best_val_ap " << format_metric(out.val_ap);
    std::cout << "\n";
    if (out.val_ap >= 0.0) aps.push_back(out.val_ap);
  }
  if (!aps.empty()) {
    double mean = 0.0;
    for (double a : aps) mean += a;
    mean /= static_cast<double>(aps.size());
    double var = 0.0;
    for (double a : aps) var += (a - mean) * (a - mean);
    var /= static_cast<double>(aps.size());
    std::cout << "val_ap_mean " << format_metric(mean) << "\n";
    std::cout << "val_ap_std " << format_metric(std::sqrt(var)) << "\n";
  }
  return 0;
}

void print_report(const eval::EvalReport& report) {
  std::cout << "ap_percent " << format_metric(report.ap_percent) << "\n";
  std::cout << "num_pairs " << report.num_pairs << "\n";
  std::cout << "num_positives " << report.num_positives << "\n";
}

void dump_pr_curve(const std::string& path, const eval::PRCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write PR curve to " + path);
  for (const auto& p : curve.points)
    out << format_metric(p.threshold) << '\t' << format_metric(p.precision) << '\t'
        << format_metric(p.recall) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic word embedding lab: synthetic corpora, encoder-decoder "
               "training, and same-different evaluation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic word-segment corpus");
  std::string gen_out;
  SynthConfig synth;
  std::string split_text;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", synth.seed, "Generator seed");
  gen->add_option("--types", synth.num_word_types, "Number of word types");
  gen->add_option("--instances", synth.instances_per_type, "Instances per type");
  gen->add_option("--dim", synth.feat_dim, "Feature dimension");
  gen->add_option("--min-len", synth.min_len, "Minimum prototype length");
  gen->add_option("--max-len", synth.max_len, "Maximum prototype length");
  gen->add_option("--warp", synth.warp, "Time-warp strength");
  gen->add_option("--noise", synth.noise, "Additive noise level");
  gen->add_option("--speaker-offset", synth.speaker_offset, "Per-instance offset scale");
  gen->add_option("--split", split_text,
                  "Comma-separated fractions (train,val,test); writes subdirectories");

  auto* pairs_cmd = app.add_subcommand("pairs", "Build a same-type pair list");
  std::string pairs_data, pairs_out, pairs_mode = "random";
  std::size_t pairs_n = 1000;
  std::uint64_t pairs_seed = 0;
  double pairs_noise_rate = 0.3;
  pairs_cmd->add_option("--data", pairs_data, "Dataset directory")->required();
  pairs_cmd->add_option("--out", pairs_out, "Output TSV path")->required();
  pairs_cmd->add_option("--mode", pairs_mode, "random | balanced | utd");
  pairs_cmd->add_option("--n", pairs_n, "Number of pairs");
  pairs_cmd->add_option("--seed", pairs_seed, "Sampler seed");
  pairs_cmd->add_option("--noise-rate", pairs_noise_rate, "Label corruption rate (utd mode)");

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Pre-train the annealed VAE");
  std::string pretrain_config, pretrain_seeds;
  pretrain_cmd->add_option("--config", pretrain_config, "key = value run configuration")
      ->required();
  pretrain_cmd->add_option("--seeds", pretrain_seeds,
                           "Comma-separated seed list; runs once per seed");

  auto* train_cmd =
      app.add_subcommand("train", "Correspondence training (cvae, mcvae, cae, siamese, ae)");
  std::string train_config, train_seeds;
  train_cmd->add_option("--config", train_config, "key = value run configuration")->required();
  train_cmd->add_option("--seeds", train_seeds, "Comma-separated seed list");

  auto* eval_cmd = app.add_subcommand("eval", "Same-different AP of a trained model");
  std::string eval_ckpt, eval_data, eval_pr;
  std::size_t eval_max_pairs = 0;
  std::uint64_t eval_sample_seed = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--pr-curve", eval_pr, "Write the PR curve as TSV");
  eval_cmd->add_option("--max-pairs", eval_max_pairs, "Subsample to at most this many pairs");
  eval_cmd->add_option("--sample-seed", eval_sample_seed, "Seed for pair subsampling");

  auto* base_cmd = app.add_subcommand("baseline", "Non-learned baselines");
  std::string base_method, base_data, base_pr;
  std::size_t base_n = 10, base_max_pairs = 0;
  std::uint64_t base_sample_seed = 0;
  base_cmd->add_option("--method", base_method, "downsample | dtw")->required();
  base_cmd->add_option("--data", base_data, "Dataset directory")->required();
  base_cmd->add_option("--n", base_n, "Downsampling points");
  base_cmd->add_option("--pr-curve", base_pr, "Write the PR curve as TSV");
  base_cmd->add_option("--max-pairs", base_max_pairs, "Subsample to at most this many pairs");
  base_cmd->add_option("--sample-seed", base_sample_seed, "Seed for pair subsampling");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Dataset data = generate_synthetic_corpus(synth);
      if (split_text.empty()) {
        save_dataset(gen_out, data);
        std::cout << "wrote " << data.size() << " segments to " << gen_out << "\n";
      } else {
        const auto fractions = parse_fractions(split_text);
        if (fractions.size() > 3)
          throw std::runtime_error("--split takes at most three fractions");
        static const char* names[] = {"train", "val", "test"};
        auto splits = split_dataset(data, fractions);
        for (std::size_t i = 0; i < splits.size(); ++i) {
          const std::string dir = (fs::path(gen_out) / names[i]).string();
          save_dataset(dir, splits[i]);
          std::cout << "wrote " << splits[i].size() << " segments to " << dir << "\n";
        }
      }
      return 0;
    }
    if (pairs_cmd->parsed()) {
      Dataset data = load_dataset(pairs_data);
      PairList list;
      if (pairs_mode == "random") list = make_random_pairs(data, pairs_n, pairs_seed);
      else if (pairs_mode == "balanced") list = make_balanced_pairs(data, pairs_n, pairs_seed);
      else if (pairs_mode == "utd")
        list = simulate_utd_pairs(data, pairs_n, pairs_noise_rate, pairs_seed);
      else throw std::runtime_error("unknown pair mode '" + pairs_mode + "'");
      save_pairs(pairs_out, data, list);
      std::cout << "wrote " << list.size() << " pairs to " << pairs_out << "\n";
      return 0;
    }
    if (pretrain_cmd->parsed())
      return run_training_command(pretrain_config, pretrain_seeds, true);
    if (train_cmd->parsed()) return run_training_command(train_config, train_seeds, false);
    if (eval_cmd->parsed()) {
      train::Checkpoint ckpt = train::load_checkpoint(eval_ckpt);
      Dataset data = load_dataset(eval_data);
      eval::EvalReport report = eval::evaluate_model_report(ckpt.model.encoder, data,
                                                            eval_max_pairs, eval_sample_seed);
      print_report(report);
      if (!eval_pr.empty()) dump_pr_curve(eval_pr, report.curve);
      return 0;
    }
    if (base_cmd->parsed()) {
      Dataset data = load_dataset(base_data);
      eval::EvalReport report;
      if (base_method == "downsample") {
        std::vector<Array> embeddings;
        embeddings.reserve(data.size());
        for (const Segment& s : data.segments)
          embeddings.push_back(eval::downsample_embedding(s, base_n));
        report = eval::evaluate_report(
            data,
            [&](const Segment& a, const Segment& b) {
              return eval::cosine_distance(embeddings[data.index_of(a.id)].data,
                                           embeddings[data.index_of(b.id)].data);
            },
            base_max_pairs, base_sample_seed);
      } else if (base_method == "dtw") {
        report = eval::evaluate_report(
            data, [](const Segment& a, const Segment& b) { return eval::dtw_cost(a, b); },
            base_max_pairs, base_sample_seed);
      } else {
        throw std::runtime_error("unknown baseline method '" + base_method + "'");
      }
      print_report(report);
      if (!base_pr.empty()) dump_pr_curve(base_pr, report.curve);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
