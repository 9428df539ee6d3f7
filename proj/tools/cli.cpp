#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "drbl/analysis.hpp"
#include "drbl/checkpoint.hpp"
#include "drbl/data_prep.hpp"
#include "drbl/diagnostics.hpp"
#include "drbl/embeddings.hpp"
#include "drbl/ensemble.hpp"
#include "drbl/errors.hpp"
#include "drbl/model_config.hpp"
#include "drbl/trainer.hpp"

#ifndef DRBL_VERSION
#define DRBL_VERSION "unknown"
#endif

namespace drbl::cli {
namespace fs = std::filesystem;
namespace {

// Usage problems detected after parsing (bad values, unknown config keys).
struct UsageError : Error {
  using Error::Error;
};

constexpr const char* kModelKeys[] = {"r",         "d",          "mlp_hidden",        "dropout",
                                      "activation", "rounds",    "seed",              "train_embeddings",
                                      "hidden_mlp", "avg_pool",  "max_pool",          "elem_prod",
                                      "difference", "inference_pooling", "dep_infer", "dep_enc"};
constexpr const char* kTrainerKeys[] = {"epochs", "batch_size", "patience", "clip_norm", "lr", "threads"};

std::string flag_name(std::string key) {
  for (auto& c : key) c = c == '_' ? '-' : c;
  return "--" + key;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path);
}

fs::path prepare_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("missing --out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  return dir;
}

// Config, seed, versions and a content hash of every input and output.
void write_manifest(const fs::path& dir, const std::string& command, const std::string& settings,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << "command = " << command << '\n'
      << "drbl_version = " << DRBL_VERSION << '\n'
      << "checkpoint_format = " << kCheckpointVersion << '\n'
      << "compiler = " << __VERSION__ << '\n';
  out << settings;
  for (const auto& p : inputs) out << "input " << p.filename().string() << " = " << hex(fnv1a(read_file(p))) << '\n';
  for (const auto& p : outputs) out << "output " << p.filename().string() << " = " << hex(fnv1a(read_file(p))) << '\n';
}

std::string data_dir() {
  const char* env = std::getenv("DRBL_DATA_DIR");
  return env ? env : "";
}

std::string default_snli(const std::string& split) {
  const std::string root = data_dir();
  if (root.empty()) return "";
  for (const fs::path& candidate : {fs::path(root) / ("snli_1.0_" + split + ".jsonl"),
                                   fs::path(root) / "snli_1.0" / ("snli_1.0_" + split + ".jsonl")}) {
    if (fs::is_regular_file(candidate)) return candidate.string();
  }
  return (fs::path(root) / ("snli_1.0_" + split + ".jsonl")).string();
}

// Model and trainer settings: defaults, then the config file, then flags.
struct Settings {
  std::string config_file;
  std::map<std::string, std::string> flags;

  ModelConfig model;
  TrainOptions train;

  void add_model_flags(CLI::App* app) {
    app->add_option("--config", config_file, "key = value settings file (flags take precedence)");
    for (const char* key : kModelKeys) add(app, key);
    add(app, "ablation", "Named ablation row (e.g. no-dep-infer)");
    add(app, "variant", "Ensemble member variant: default, tanh-projection, one-round, three-round");
  }
  void add_trainer_flags(CLI::App* app) {
    for (const char* key : kTrainerKeys) add(app, key);
  }

  void resolve() {
    std::map<std::string, std::string> file;
    if (!config_file.empty()) {
      require_file(config_file, "config file");
      try {
        file = parse_key_values(read_file(config_file));
      } catch (const ParseError& e) {
        throw UsageError(config_file + ": " + e.what());
      }
    }
    apply(file, "config file");
    apply(flags, "flags");
    model.validate();
  }

  std::string to_text() const {
    std::ostringstream out;
    out << model.to_text();
    out << "epochs = " << train.max_epochs << '\n'
        << "batch_size = " << train.batch_size << '\n'
        << "patience = " << train.patience << '\n'
        << "clip_norm = " << train.clip_norm << '\n'
        << "lr = " << train.adam.learning_rate << '\n';
    return out.str();
  }

 private:
  void add(CLI::App* app, const std::string& key, const std::string& help = "") {
    app->add_option_function<std::string>(
        flag_name(key), [this, key](const std::string& v) { flags[key] = v; },
        help.empty() ? "setting '" + key + "'" : help);
  }

  void apply(const std::map<std::string, std::string>& values, const std::string& origin) {
    if (auto it = values.find("ablation"); it != values.end()) {
      bool found = false;
      for (const auto& c : ablation_configurations()) {
        if (c.name == it->second) {
          model.ablations = c.ablations;
          found = true;
        }
      }
      if (!found) throw UsageError("unknown ablation '" + it->second + "'");
    }
    if (auto it = values.find("variant"); it != values.end()) {
      try {
        model = member_variant(model, it->second);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
    for (const auto& [key, value] : values) {
      if (key == "ablation" || key == "variant") continue;
      try {
        if (model.set(key, value)) continue;
        if (!set_trainer(key, value)) throw UsageError("unknown setting '" + key + "' in " + origin);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
  }

  bool set_trainer(const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      if (key == "epochs") {
        train.max_epochs = std::stoul(value, &used);
      } else if (key == "batch_size") {
        train.batch_size = std::stoul(value, &used);
      } else if (key == "patience") {
        train.patience = std::stoul(value, &used);
      } else if (key == "clip_norm") {
        train.clip_norm = std::stod(value, &used);
      } else if (key == "lr") {
        train.adam.learning_rate = std::stod(value, &used);
      } else if (key == "threads") {
        train.threads = std::stoul(value, &used);
      } else {
        return false;
      }
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw UsageError("invalid value '" + value + "' for " + key);
    }
    return true;
  }
};

Vocabulary load_or_build_vocab(const std::string& vocab_path, std::span<const SentencePair> train) {
  if (!vocab_path.empty()) {
    require_file(vocab_path, "vocabulary");
    return Vocabulary::load(vocab_path);
  }
  return Vocabulary::build(train);
}

std::vector<Distribution> distributions(std::span<const Prediction> predictions) {
  std::vector<Distribution> out;
  for (const auto& p : predictions) out.push_back(p.probs);
  return out;
}

std::vector<std::string> ids_of(std::span<const Example> examples) {
  std::vector<std::string> out;
  for (const auto& e : examples) out.push_back(e.id);
  return out;
}

std::vector<Label> golds_of(std::span<const SentencePair> pairs) {
  std::vector<Label> out;
  for (const auto& p : pairs) out.push_back(p.label);
  return out;
}

void save_vocab(const Vocabulary& vocab, const fs::path& dir) {
  vocab.save(dir / "vocab.txt");
  vocab.save_counts(dir / "vocab.txt.counts");
}

// ---- subcommands ----

struct PreprocessArgs {
  std::string train, dev, test, out;
  bool no_recover = false;
};

int run_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const std::string train_path = a.train.empty() ? default_snli("train") : a.train;
  require_file(train_path, "training data");
  const fs::path dir = prepare_dir(a.out);

  SnliLoadStats stats;
  auto train = load_pairs(train_path, &stats);
  out << "train: " << train.size() << " pairs (" << stats.dropped_no_consensus
      << " without consensus dropped)\n";
  const Vocabulary vocab = Vocabulary::build(train);
  out << "vocabulary: " << vocab.size() << " tokens\n";

  std::vector<fs::path> inputs{train_path}, outputs;
  write_tokenized(dir / "train.tsv", train);
  outputs.push_back(dir / "train.tsv");
  const std::pair<std::string, std::string> splits[] = {{"dev", a.dev}, {"test", a.test}};
  for (const auto& [name, given] : splits) {
    const std::string path = given.empty() ? default_snli(name) : given;
    if (path.empty() || (given.empty() && !fs::is_regular_file(path))) continue;
    require_file(path, (name + " data").c_str());
    inputs.push_back(path);
    stats = {};
    auto pairs = load_pairs(path, &stats);
    const std::size_t unknown_before = count_unknown(pairs, vocab);
    if (!a.no_recover) {
      for (auto& p : pairs) {
        p.premise = recover_sentence(p.premise, vocab);
        p.hypothesis = recover_sentence(p.hypothesis, vocab);
      }
    }
    const std::size_t unknown_after = count_unknown(pairs, vocab);
    out << name << ": " << pairs.size() << " pairs (" << stats.dropped_no_consensus
        << " without consensus dropped), unknown tokens " << unknown_before << " -> " << unknown_after << '\n';
    write_tokenized(dir / (name + ".tsv"), pairs);
    outputs.push_back(dir / (name + ".tsv"));
  }
  save_vocab(vocab, dir);
  outputs.push_back(dir / "vocab.txt");
  outputs.push_back(dir / "vocab.txt.counts");
  write_manifest(dir, "preprocess", std::string("recover = ") + (a.no_recover ? "false" : "true") + '\n',
                 inputs, outputs);
  return kExitOk;
}

struct TrainArgs {
  std::string train, dev, vocab, embeddings, out;
  bool clean_train_accuracy = false;
};

int run_train(const TrainArgs& a, Settings& s, std::ostream& out) {
  s.resolve();
  const std::string train_path = a.train.empty() ? default_snli("train") : a.train;
  const std::string dev_path = a.dev.empty() ? default_snli("dev") : a.dev;
  require_file(train_path, "training data");
  require_file(dev_path, "development data");
  if (!a.embeddings.empty()) require_file(a.embeddings, "embedding file");
  const fs::path dir = prepare_dir(a.out);

  const auto train_pairs = load_pairs(train_path);
  const auto dev_pairs = load_pairs(dev_path);
  const Vocabulary vocab = load_or_build_vocab(a.vocab, train_pairs);
  std::optional<EmbeddingTable<float>> table;
  if (!a.embeddings.empty()) {
    std::mt19937_64 rng(s.model.seed);
    PretrainedReport report;
    table = load_pretrained<float>(a.embeddings, vocab, s.model.embedding_dim, rng, &report);
    out << "pretrained coverage: " << report.covered << " / " << report.vocabulary << '\n';
  }
  auto params = ModelParams<float>::init(s.model, vocab, std::move(table));
  out << "parameters: " << params.parameter_count() << '\n';

  const auto train_set = make_examples(train_pairs, vocab);
  const auto dev_set = make_examples(dev_pairs, vocab);
  TrainOptions options = s.train;
  options.seed = s.model.seed;
  options.clean_train_accuracy = a.clean_train_accuracy;
  options.on_epoch = [&out](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << r.mean_loss << " train " << r.train_accuracy << " dev "
        << r.dev_accuracy << std::endl;
  };
  auto result = train(params, train_set, dev_set, options);

  save_checkpoint(dir / "model.ckpt",
                  make_checkpoint(result.best, &result.adam, result.best_dev_accuracy, s.model.seed));
  write_history(dir / "history.csv", result.history);
  save_vocab(vocab, dir);
  const auto dev_eval = evaluate(result.best, dev_set, options.threads);
  write_predictions(dir / "dev_predictions.csv", ids_of(dev_set), distributions(dev_eval.predictions));
  out << std::setprecision(17) << "best dev accuracy " << result.best_dev_accuracy << " (epoch "
      << result.best_epoch << ")\n";

  std::vector<fs::path> inputs{train_path, dev_path};
  if (!a.vocab.empty()) inputs.push_back(a.vocab);
  if (!a.embeddings.empty()) inputs.push_back(a.embeddings);
  write_manifest(dir, "train", s.to_text(), inputs,
                 {dir / "model.ckpt", dir / "history.csv", dir / "vocab.txt", dir / "dev_predictions.csv"});
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, vocab, data, out;
  std::size_t threads = 1;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "evaluation data");
  std::string vocab_path = a.vocab;
  if (vocab_path.empty()) vocab_path = (fs::path(a.checkpoint).parent_path() / "vocab.txt").string();
  require_file(vocab_path, "vocabulary");
  const auto checkpoint = load_checkpoint(a.checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const auto params = restore_model(checkpoint, vocab);
  const auto examples = make_examples(load_pairs(a.data), vocab);
  const auto ev = evaluate(params, examples, a.threads);
  out << std::setprecision(17) << "accuracy " << ev.accuracy << '\n'
      << "recorded dev accuracy " << checkpoint.best_dev_accuracy << '\n';
  if (!a.out.empty()) {
    const fs::path dir = prepare_dir(a.out);
    write_predictions(dir / "predictions.csv", ids_of(examples), distributions(ev.predictions));
    write_manifest(dir, "eval", checkpoint.config.to_text(), {a.checkpoint, vocab_path, a.data},
                   {dir / "predictions.csv"});
  }
  return kExitOk;
}

struct EnsembleArgs {
  std::string dev_gold, test_gold, strategy = "learned", out;
  std::vector<std::string> dev, test;
  std::size_t max_members = 0;
  double step = 0.05;
};

int run_ensemble(const EnsembleArgs& a, std::ostream& out) {
  require_file(a.dev_gold, "development gold data");
  if (a.dev.empty()) throw UsageError("--dev needs at least one prediction file");
  if (!a.test.empty()) {
    require_file(a.test_gold, "test gold data");
    if (a.test.size() != a.dev.size()) throw UsageError("--test needs one file per --dev file");
  }
  const fs::path dir = prepare_dir(a.out);
  std::vector<fs::path> inputs{a.dev_gold};
  std::vector<MemberOutput> dev, test;
  for (const auto& p : a.dev) {
    require_file(p, "prediction file");
    dev.push_back(read_predictions(p));
    inputs.push_back(p);
  }
  for (const auto& p : a.test) {
    require_file(p, "prediction file");
    test.push_back(read_predictions(p));
    inputs.push_back(p);
  }
  const auto dev_gold = golds_of(load_pairs(a.dev_gold));
  std::vector<Label> test_gold;
  if (!test.empty()) {
    test_gold = golds_of(load_pairs(a.test_gold));
    inputs.push_back(a.test_gold);
  }
  check_coverage(dev, dev_gold.size());
  if (!test.empty()) check_coverage(test, test_gold.size());

  std::vector<std::size_t> chosen(dev.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  std::vector<double> weights;
  std::vector<fs::path> outputs;
  if (a.strategy == "learned") {
    if (a.max_members > 0) {
      const auto sel = greedy_select(dev, dev_gold, a.max_members, test, test_gold, a.step);
      std::ofstream sf(dir / "selection.tsv");
      sf << std::setprecision(17) << "members\tdev_accuracy\ttest_accuracy\tchosen\n";
      for (const auto& st : sel.steps) {
        sf << st.size << '\t' << st.dev_accuracy << '\t';
        if (st.test_accuracy) sf << *st.test_accuracy; else sf << '-';
        sf << '\t';
        for (std::size_t i = 0; i < st.members.size(); ++i) sf << (i ? "," : "") << dev[st.members[i]].id;
        sf << '\n';
      }
      sf.close();
      outputs.push_back(dir / "selection.tsv");
      const auto& best = sel.steps[sel.best_size - 1];
      chosen = best.members;
      weights = best.weights;
      out << "best ensemble size " << sel.best_size << '\n';
    } else {
      weights = learn_weights(dev, dev_gold, a.step).weights;
    }
  } else if (a.strategy == "accuracy") {
    weights = accuracy_weights(dev, dev_gold);
  } else if (a.strategy == "average") {
    weights.assign(dev.size(), 1.0 / static_cast<double>(dev.size()));
  } else if (a.strategy != "majority") {
    throw UsageError("unknown strategy '" + a.strategy + "'");
  }

  auto pick = [&](const std::vector<MemberOutput>& all) {
    std::vector<MemberOutput> sel;
    for (auto i : chosen) sel.push_back(all[i]);
    return sel;
  };
  auto combine = [&](const std::vector<MemberOutput>& members) {
    if (a.strategy == "majority") {
      std::vector<Distribution> one_hot;
      for (Label l : majority_vote(members)) {
        Distribution d{};
        d[label_index(l)] = 1.0;
        one_hot.push_back(d);
      }
      return one_hot;
    }
    return weighted_average(members, weights);
  };

  std::ofstream wf(dir / "weights.tsv");
  wf << std::setprecision(17) << "member\tweight\n";
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    wf << dev[chosen[i]].id << '\t' << (weights.empty() ? 0.0 : weights[i]) << '\n';
  }
  wf.close();
  outputs.push_back(dir / "weights.tsv");

  const auto dev_members = pick(dev);
  const auto dev_probs = combine(dev_members);
  out << std::setprecision(17) << "dev accuracy " << accuracy_of(dev_probs, dev_gold) << '\n';
  write_predictions(dir / "dev_ensemble.csv", dev_members.front().pair_ids, dev_probs);
  outputs.push_back(dir / "dev_ensemble.csv");
  if (!test.empty()) {
    const auto test_members = pick(test);
    const auto test_probs = combine(test_members);
    out << "test accuracy " << accuracy_of(test_probs, test_gold) << '\n';
    write_predictions(dir / "test_ensemble.csv", test_members.front().pair_ids, test_probs);
    outputs.push_back(dir / "test_ensemble.csv");
  }
  std::ostringstream settings;
  settings << "strategy = " << a.strategy << "\nstep = " << a.step << "\nmax_members = " << a.max_members << '\n';
  write_manifest(dir, "ensemble", settings.str(), inputs, outputs);
  return kExitOk;
}

struct AnalyzeArgs {
  std::string data, out;
  std::vector<std::string> predictions;
};

int run_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const std::string data_path = a.data.empty() ? default_snli("test") : a.data;
  require_file(data_path, "evaluation data");
  const fs::path dir = prepare_dir(a.out);
  SnliLoadStats stats;
  const auto pairs = load_pairs(data_path, &stats);
  std::vector<TagSet> tags;
  for (const auto& p : pairs) tags.push_back(annotate(p));
  const auto gold = golds_of(pairs);

  std::vector<fs::path> inputs{data_path};
  std::vector<std::vector<Label>> predicted;
  std::vector<std::string> names;
  for (const auto& path : a.predictions) {
    require_file(path, "prediction file");
    inputs.push_back(path);
    const auto m = read_predictions(path);
    if (m.size() != pairs.size()) {
      throw DataError(path + " covers " + std::to_string(m.size()) + " pairs, data has " +
                      std::to_string(pairs.size()));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (m.pair_ids[i] != pairs[i].id) throw DataError(path + ": pair order differs at row " + std::to_string(i + 1));
    }
    predicted.push_back(argmax_labels(m.probs));
    names.push_back(m.id);
  }
  const auto report = categorical_accuracy(predicted, names, gold, tags);
  {
    std::ofstream rf(dir / "report.tsv");
    write_report(rf, report);
  }
  write_report(out, report);
  std::vector<fs::path> outputs{dir / "report.tsv"};
  if (predicted.size() >= 2) {
    std::ofstream cf(dir / "chi_square.tsv");
    cf << std::setprecision(10) << "model_a\tmodel_b\tstatistic\tp_value\tlow_expected_count\n";
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      for (std::size_t j = i + 1; j < predicted.size(); ++j) {
        const auto r = chi_square(predicted[i], predicted[j], gold);
        cf << names[i] << '\t' << names[j] << '\t' << r.statistic << '\t' << r.p_value << '\t'
           << (r.low_expected_count ? "yes" : "no") << '\n';
        out << "chi-square " << names[i] << " vs " << names[j] << ": " << r.statistic << " (p = " << r.p_value
            << ")\n";
      }
    }
    outputs.push_back(dir / "chi_square.tsv");
  }
  write_manifest(dir, "analyze", "", inputs, outputs);
  return kExitOk;
}

struct HeatmapArgs {
  std::string checkpoint, vocab, premise, hypothesis, out;
  bool no_recover = false;
};

int run_heatmap(const HeatmapArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  std::string vocab_path = a.vocab;
  if (vocab_path.empty()) vocab_path = (fs::path(a.checkpoint).parent_path() / "vocab.txt").string();
  require_file(vocab_path, "vocabulary");
  if (a.premise.empty() || a.hypothesis.empty()) throw UsageError("--premise and --hypothesis are required");
  const fs::path dir = prepare_dir(a.out);
  const auto checkpoint = load_checkpoint(a.checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const auto params = restore_model(checkpoint, vocab);
  SentencePair pair{"heatmap", tokenize(a.premise), tokenize(a.hypothesis), Label::entailment};
  if (!a.no_recover) {
    pair.premise = recover_sentence(pair.premise, vocab);
    pair.hypothesis = recover_sentence(pair.hypothesis, vocab);
  }
  Tape<float> tape;
  const auto result = forward(tape, params, PairInput::from(pair, vocab), false);
  std::vector<std::vector<double>> energy(result.energy.rows(), std::vector<double>(result.energy.cols()));
  for (std::size_t i = 0; i < energy.size(); ++i)
    for (std::size_t j = 0; j < energy[i].size(); ++j) energy[i][j] = result.energy(i, j);
  export_heatmap(energy, pair.premise, pair.hypothesis, dir / "heatmap");
  out << "predicted " << label_name(result.prediction.label) << '\n';
  write_manifest(dir, "heatmap", "premise = " + a.premise + "\nhypothesis = " + a.hypothesis + '\n',
                 {a.checkpoint, vocab_path}, {dir / "heatmap.csv", dir / "heatmap.svg"});
  return kExitOk;
}

struct GradcheckArgs {
  std::size_t max_tokens = 7;
  std::size_t samples = 24;
  double eps = 1e-3;
  double threshold = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a, Settings& s, std::ostream& out) {
  if (!s.flags.count("r")) s.flags["r"] = "8";
  if (!s.flags.count("d")) s.flags["d"] = "12";
  s.resolve();
  GradCheckOptions options;
  options.eps = a.eps;
  options.samples_per_tensor = a.samples;
  const auto report = model_grad_check(s.model, a.max_tokens, s.model.seed, options);
  out << std::scientific << std::setprecision(3);
  bool all_checked = true;
  for (const auto& [name, err] : report.max_by_tensor) {
    const auto checked = report.checked_by_tensor.at(name);
    all_checked = all_checked && checked > 0;
    out << name << '\t' << err << '\t' << checked << " samples\n";
  }
  out << "kink samples skipped " << report.kinks << '\n';
  out << "max relative error " << report.max_rel_error << '\n' << std::defaultfloat;
  return report.passed(a.threshold) && all_checked ? kExitOk : kExitFailure;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentence-pair inference with BiLSTM encoders and soft alignment", "drbl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DRBL_VERSION);

  PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand("preprocess", "Tokenize SNLI, build the vocabulary, recover unknown words");
  cmd_pre->add_option("--train", pre.train, "Training split (jsonl or tsv); default from DRBL_DATA_DIR");
  cmd_pre->add_option("--dev", pre.dev, "Development split");
  cmd_pre->add_option("--test", pre.test, "Test split");
  cmd_pre->add_option("--out", pre.out, "Output directory")->required();
  cmd_pre->add_flag("--no-recover", pre.no_recover, "Keep unknown words as they are");

  TrainArgs tr;
  Settings train_settings;
  auto* cmd_train = app.add_subcommand("train", "Train a model and keep the best development checkpoint");
  cmd_train->add_option("--train", tr.train, "Training pairs (jsonl or tsv)");
  cmd_train->add_option("--dev", tr.dev, "Development pairs");
  cmd_train->add_option("--vocab", tr.vocab, "Vocabulary file (built from training data if absent)");
  cmd_train->add_option("--embeddings", tr.embeddings, "Pretrained vectors, one token and r values per line");
  cmd_train->add_option("--out", tr.out, "Output directory")->required();
  cmd_train->add_flag("--clean-train-accuracy", tr.clean_train_accuracy,
                      "Measure training accuracy without dropout after each epoch");
  train_settings.add_model_flags(cmd_train);
  train_settings.add_trainer_flags(cmd_train);

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  cmd_eval->add_option("--vocab", ev.vocab, "Vocabulary (default: beside the checkpoint)");
  cmd_eval->add_option("--data", ev.data, "Pairs to evaluate")->required();
  cmd_eval->add_option("--out", ev.out, "Directory for predictions.csv");
  cmd_eval->add_option("--threads", ev.threads, "Worker threads");

  EnsembleArgs en;
  auto* cmd_ens = app.add_subcommand("ensemble", "Combine member prediction files");
  cmd_ens->add_option("--dev-gold", en.dev_gold, "Development pairs with gold labels")->required();
  cmd_ens->add_option("--dev", en.dev, "Member development predictions (CSV)")->required();
  cmd_ens->add_option("--test-gold", en.test_gold, "Test pairs with gold labels");
  cmd_ens->add_option("--test", en.test, "Member test predictions, same order as --dev");
  cmd_ens->add_option("--strategy", en.strategy, "learned, accuracy, average or majority");
  cmd_ens->add_option("--max-members", en.max_members, "Greedy selection up to this many members");
  cmd_ens->add_option("--step", en.step, "Weight grid step");
  cmd_ens->add_option("--out", en.out, "Output directory")->required();

  AnalyzeArgs an;
  auto* cmd_an = app.add_subcommand("analyze", "Annotation tags, categorical accuracy and chi-square tests");
  cmd_an->add_option("--data", an.data, "Pairs (default: SNLI test from DRBL_DATA_DIR)");
  cmd_an->add_option("--predictions", an.predictions, "Prediction CSVs, one per model");
  cmd_an->add_option("--out", an.out, "Output directory")->required();

  HeatmapArgs hm;
  auto* cmd_hm = app.add_subcommand("heatmap", "Export attention weights for one pair");
  cmd_hm->add_option("--checkpoint", hm.checkpoint, "Checkpoint file")->required();
  cmd_hm->add_option("--vocab", hm.vocab, "Vocabulary (default: beside the checkpoint)");
  cmd_hm->add_option("--premise", hm.premise, "Premise text")->required();
  cmd_hm->add_option("--hypothesis", hm.hypothesis, "Hypothesis text")->required();
  cmd_hm->add_option("--out", hm.out, "Output directory")->required();
  cmd_hm->add_flag("--no-recover", hm.no_recover, "Skip unknown-word recovery");

  GradcheckArgs gc;
  Settings gc_settings;
  auto* cmd_gc = app.add_subcommand("gradcheck", "Finite-difference check of all model gradients");
  cmd_gc->add_option("--max-tokens", gc.max_tokens, "Longest sentence, markers included");
  cmd_gc->add_option("--samples", gc.samples, "Coordinates checked per tensor");
  cmd_gc->add_option("--eps", gc.eps, "Finite-difference step");
  cmd_gc->add_option("--threshold", gc.threshold, "Pass threshold on the relative error");
  gc_settings.add_model_flags(cmd_gc);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_pre->parsed()) return run_preprocess(pre, out);
    if (cmd_train->parsed()) return run_train(tr, train_settings, out);
    if (cmd_eval->parsed()) return run_eval(ev, out);
    if (cmd_ens->parsed()) return run_ensemble(en, out);
    if (cmd_an->parsed()) return run_analyze(an, out);
    if (cmd_hm->parsed()) return run_heatmap(hm, out);
    if (cmd_gc->parsed()) return run_gradcheck(gc, gc_settings, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace drbl::cli
