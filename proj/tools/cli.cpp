#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "segkey/blockwise.hpp"
#include "segkey/checkpoint.hpp"
#include "segkey/dataset.hpp"
#include "segkey/errors.hpp"
#include "segkey/evaluate.hpp"
#include "segkey/report.hpp"
#include "segkey/train.hpp"

namespace segkey::cli {

namespace {

struct KeyArgs {
  std::string file;
  std::string hex;

  void add_to(CLI::App* cmd) {
    auto* f = cmd->add_option("--key-file", file, "File holding 64 hex characters");
    auto* h = cmd->add_option("--key-hex", hex, "Key as 64 hex characters");
    f->excludes(h);
  }

  std::optional<SecretKey> load() const {
    if (!file.empty()) return read_key_file(file);
    if (!hex.empty()) return SecretKey::from_hex(hex);
    return std::nullopt;
  }
};

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + name + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Run metadata lives next to the output so data files stay reproducible.
void append_log(const std::filesystem::path& output, const std::string& line) {
  std::ofstream log(output.string() + ".log", std::ios::app);
  log << timestamp() << ' ' << line << '\n';
}

TrainConfig load_train_config(const std::string& path, MiniFcnConfig& model) {
  TrainConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    static const std::vector<std::string> kKnown = {
        "epochs", "batch_size", "lr_max", "lr_min", "restart_period", "momentum",
        "weight_decay", "augment", "seed", "model"};
    for (const auto& [k, _] : j.items()) {
      if (std::find(kKnown.begin(), kKnown.end(), k) == kKnown.end()) {
        throw ParseError(path + ": unknown field '" + k + "'");
      }
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr_max = j.value("lr_max", cfg.lr_max);
    cfg.lr_min = j.value("lr_min", cfg.lr_min);
    cfg.restart_period = j.value("restart_period", cfg.restart_period);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.augment = j.value("augment", cfg.augment);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("model") && j["model"].contains("widths")) {
      model.widths = j["model"]["widths"].get<std::array<std::size_t, 4>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Key-based access control for segmentation models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  std::optional<std::uint64_t> global_seed;
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", global_seed, "Global seed");

  // gen-data
  GenerateOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic shapes dataset");
  gen_cmd->add_option("--train", gen.n_train);
  gen_cmd->add_option("--dev", gen.n_dev);
  gen_cmd->add_option("--test", gen.n_test);
  gen_cmd->add_option("--size", gen.size);
  gen_cmd->add_option("--out", gen_out)->required();

  // gen-key
  std::string key_out;
  auto* key_cmd = app.add_subcommand("gen-key", "Write a fresh random key file");
  key_cmd->add_option("--out", key_out)->required();

  // train
  std::string train_config, protect = "none", data_dir, ckpt_out, curves_out, model_id;
  KeyArgs train_key;
  auto* train_cmd = app.add_subcommand("train", "Train a (protected) MiniFCN");
  train_cmd->add_option("--config", train_config, "Training JSON");
  train_cmd->add_option("--protect", protect, "none | hooks=1,6 | shf=16 | np=8 | ffx=4");
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--out", ckpt_out)->required();
  train_cmd->add_option("--curves", curves_out, "Loss curve CSV (default <out>.curves.csv)");
  train_cmd->add_option("--model-id", model_id);
  train_key.add_to(train_cmd);

  // eval
  std::string eval_ckpt, eval_data, eval_split = "test", eval_conditions = "correct",
                                    eval_out;
  std::size_t n_keys = 100;
  std::uint64_t eval_seed = 2023;
  KeyArgs eval_key;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate mean IoU under key conditions");
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--split", eval_split);
  eval_cmd->add_option("--conditions", eval_conditions, "correct,no_perm,incorrect,plain");
  eval_cmd->add_option("--n-keys", n_keys)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--eval-seed", eval_seed);
  eval_cmd->add_option("--out-dir", eval_out)->required();
  eval_key.add_to(eval_cmd);

  // attack
  std::string attack_ckpt, attack_data, attack_split = "test", attack_out, attack_hooks;
  std::size_t trials = 100, subset = 0;
  std::uint64_t attack_seed = 99;
  auto* attack_cmd = app.add_subcommand("attack", "Random-key estimation attack");
  attack_cmd->add_option("--checkpoint", attack_ckpt)->required();
  attack_cmd->add_option("--data", attack_data)->required();
  attack_cmd->add_option("--split", attack_split);
  attack_cmd->add_option("--subset", subset, "Use the first N samples (0 = all)");
  attack_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
  attack_cmd->add_option("--attack-seed", attack_seed);
  attack_cmd->add_option("--hooks", attack_hooks, "Hooks to permute (default: the model's)");
  attack_cmd->add_option("--out", attack_out)->required();

  // transform-image
  std::string kind, img_in, img_out;
  std::size_t block_size = 0;
  bool decrypt = false;
  KeyArgs tf_key;
  auto* tf_cmd = app.add_subcommand("transform-image", "Apply a block-wise transform to a PPM");
  tf_cmd->add_option("--kind", kind)->required()->check(CLI::IsMember({"shf", "np", "ffx"}));
  tf_cmd->add_option("--block-size", block_size)->required();
  tf_cmd->add_option("--in", img_in)->required();
  tf_cmd->add_option("--out", img_out)->required();
  tf_cmd->add_flag("--decrypt", decrypt);
  tf_key.add_to(tf_cmd);

  // report
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Merge JSON reports into table CSVs");
  report_cmd->add_option("--out-dir", report_out)->required();
  report_cmd->add_option("reports", report_inputs, "Report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen_cmd) {
      if (global_seed) gen.seed = *global_seed;
      const DatasetManifest m = generate_dataset(gen, gen_out);
      out << "wrote " << m.n_train << "/" << m.n_dev << "/" << m.n_test
          << " samples to " << gen_out << '\n';
    } else if (*key_cmd) {
      std::optional<SecretKey> key;
      if (global_seed) {
        SplitMix64 stream(*global_seed);
        key = random_key(stream);
      } else {
        key = random_key();
      }
      write_key_file(key_out, *key);
    } else if (*train_cmd) {
      const DatasetManifest manifest = read_manifest(data_dir);
      TrainJob job;
      job.model.num_classes = manifest.num_classes;
      job.model.input_size = manifest.size;
      job.train = load_train_config(train_config, job.model);
      if (global_seed) job.train.seed = *global_seed;
      job.train.threads = threads;
      job.protection = parse_protection(protect);
      job.key = train_key.load();
      if (!job.protection.is_baseline() && !job.key) {
        throw KeyError("--protect " + protect + " requires --key-file or --key-hex");
      }
      const auto train_set = load_split(data_dir, Split::kTrain);
      const auto dev_set = load_split(data_dir, Split::kDev);
      append_log(ckpt_out, "train start protect=" + to_string(job.protection));
      const TrainResult result = train(job, train_set, dev_set, [&](const EpochLog& e) {
        out << "epoch " << e.epoch << " train_loss " << e.train_loss << " dev_loss "
            << e.dev_loss << " lr " << e.lr << '\n';
      });
      Checkpoint ckpt{model_id.empty() ? default_model_id(job.protection) : model_id,
                      job.model, job.protection, result.best};
      save_checkpoint(ckpt_out, ckpt);
      write_loss_curves(curves_out.empty() ? ckpt_out + ".curves.csv" : curves_out,
                        result.history);
      append_log(ckpt_out, "train done best_epoch=" + std::to_string(result.best_epoch));
      out << "best epoch " << result.best_epoch << " dev_loss " << result.best_dev_loss
          << '\n';
    } else if (*eval_cmd) {
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const auto samples = load_split(eval_data, parse_split(eval_split));
      std::vector<EvalCondition> conditions;
      for (const auto& name : split_list(eval_conditions)) {
        conditions.push_back({parse_condition(name), n_keys});
      }
      if (conditions.empty()) throw InvalidArgument("no conditions requested");
      EvalOptions options;
      options.eval_seed = eval_seed;
      options.threads = threads;
      const auto reports =
          evaluate_conditions(ckpt, eval_key.load(), samples, conditions, options);
      for (const auto& r : reports) {
        const auto path = write_report(eval_out, r);
        out << condition_name(r.condition) << " mean_iou " << r.mean_iou << " -> "
            << path.string() << '\n';
      }
    } else if (*attack_cmd) {
      const Checkpoint ckpt = load_checkpoint(attack_ckpt);
      auto samples = load_split(attack_data, parse_split(attack_split));
      if (subset > 0 && subset < samples.size()) samples.resize(subset);
      std::vector<int> hooks = ckpt.protection.hooks;
      if (!attack_hooks.empty()) {
        hooks.clear();
        for (const auto& h : split_list(attack_hooks)) hooks.push_back(std::stoi(h));
      }
      EvalOptions options;
      options.threads = threads;
      const AttackResult result =
          key_estimation_attack(ckpt, hooks, samples, trials, attack_seed, options);
      nlohmann::ordered_json j;
      j["model"] = ckpt.model_id;
      j["trials"] = trials;
      j["attack_seed"] = attack_seed;
      j["best_score"] = result.best_score;
      j["best_key"] = result.best_key.to_hex();
      j["scores"] = result.scores;
      std::ofstream f(attack_out, std::ios::binary);
      if (!f) throw Error("cannot write " + attack_out);
      f << j.dump(2) << '\n';
      out << "best mean_iou " << result.best_score << " over " << trials << " keys\n";
    } else if (*tf_cmd) {
      const auto key = tf_key.load();
      if (!key) throw KeyError("transform-image requires --key-file or --key-hex");
      const ImageU8 img = read_ppm(img_in);
      const BlockTransformConfig cfg{parse_block_kind(kind), block_size, *key};
      write_ppm(img_out, apply_block_transform(img, cfg, decrypt));
    } else if (*report_cmd) {
      std::vector<EvalReport> reports;
      for (const auto& path : report_inputs) reports.push_back(read_report(path));
      std::filesystem::create_directories(report_out);
      std::ofstream t1(std::filesystem::path(report_out) / "table1.csv", std::ios::binary);
      std::ofstream t2(std::filesystem::path(report_out) / "table2.csv", std::ios::binary);
      if (!t1 || !t2) throw Error("cannot write tables in " + report_out);
      t1 << table_one_csv(reports);
      t2 << table_two_csv(reports);
    }
  } catch (const KeyError& e) {
    err << "error: " << e.what() << '\n';
    return kMissingKey;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kMalformedInput;
  } catch (const DivergenceError& e) {
    err << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return kDiverged;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidArgument;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace segkey::cli
