// Command-line front end: dataset statistics, pre-training, supervised
// training, evaluation, and prediction over dialogue SRL data.
//
// Exit codes: 0 success, 2 data error, 3 stage-order violation,
// 4 checkpoint problem, 1 anything else.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csrl/checkpoint.hpp"
#include "csrl/config.hpp"
#include "csrl/corpus.hpp"
#include "csrl/inference.hpp"
#include "csrl/model.hpp"
#include "csrl/trainer.hpp"
#include "json.hpp"

namespace {

using csrl::CheckpointError;
using csrl::ConfigError;
using csrl::ModelConfig;
using csrl::StageOrderError;
using csrl::corpus::DataError;
using nlohmann::json;

// ---- Flat key = value configuration files ----------------------------------

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    kv[key] = value;
  }
  return kv;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": not a boolean: " + v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& kv,
                  ModelConfig& mc, csrl::train::TrainConfig& tc) {
  for (const auto& [key, v] : kv) {
    if (key == "vocab_size") mc.vocab_size = to_int(key, v);
    else if (key == "backbone_layers") mc.backbone_layers = to_int(key, v);
    else if (key == "backbone_width") mc.backbone_width = to_int(key, v);
    else if (key == "backbone_heads") mc.backbone_heads = to_int(key, v);
    else if (key == "backbone_ffn") mc.backbone_ffn = to_int(key, v);
    else if (key == "max_seq_len") mc.max_seq_len = to_int(key, v);
    else if (key == "model_width") mc.model_width = to_int(key, v);
    else if (key == "word_layers") mc.word_layers = to_int(key, v);
    else if (key == "pa_layers") mc.pa_layers = to_int(key, v);
    else if (key == "variant")
      mc.variant = csrl::mtrans_variant_from_string(v);
    else if (key == "heads") mc.heads = to_int(key, v);
    else if (key == "ffn_width") mc.ffn_width = to_int(key, v);
    else if (key == "turn_width") mc.turn_width = to_int(key, v);
    else if (key == "speaker_width") mc.speaker_width = to_int(key, v);
    else if (key == "predicate_width") mc.predicate_width = to_int(key, v);
    else if (key == "max_turns") mc.max_turns = to_int(key, v);
    else if (key == "max_speakers") mc.max_speakers = to_int(key, v);
    else if (key == "utterance_layers") mc.utterance_layers = to_int(key, v);
    else if (key == "dropout") mc.dropout = to_double(key, v);
    else if (key == "project_before_norm")
      mc.project_before_norm = to_bool(key, v);
    else if (key == "pooling") mc.pooling = csrl::word_pooling_from_string(v);
    else if (key == "roles") mc.roles = split_list(v);
    else if (key == "batch_size") tc.batch_size = to_int(key, v);
    else if (key == "max_lr") tc.max_lr = to_double(key, v);
    else if (key == "min_lr") tc.min_lr = to_double(key, v);
    else if (key == "lm_max_lr") tc.lm_max_lr = to_double(key, v);
    else if (key == "lm_min_lr") tc.lm_min_lr = to_double(key, v);
    else if (key == "max_epochs") tc.max_epochs = to_int(key, v);
    else if (key == "max_steps") tc.max_steps = to_int(key, v);
    else if (key == "patience") tc.patience = to_int(key, v);
    else if (key == "freeze_lm") tc.freeze_lm = to_bool(key, v);
    else if (key == "weight_decay") tc.weight_decay = to_double(key, v);
    else if (key == "warmup_fraction") tc.warmup_fraction = to_double(key, v);
    else if (key == "seed")
      tc.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "spi_mask_percent")
      tc.spi_mask_percent = to_double(key, v);
    else if (key == "uor_shuffle_percent")
      tc.uor_shuffle_percent = to_double(key, v);
    else if (key == "tlm_mask_rate") tc.tlm_mask_rate = to_double(key, v);
    else throw ConfigError("unknown config key: " + key);
  }
}

// ---- Shared option state ----------------------------------------------------

struct CommonOptions {
  std::string config_path;
  std::optional<int> steps, epochs, batch;
  std::optional<std::uint64_t> seed;
  std::string metrics_path;

  void resolve(ModelConfig& mc, csrl::train::TrainConfig& tc) const {
    if (!config_path.empty()) apply_config(read_config_file(config_path), mc, tc);
    if (steps) tc.max_steps = *steps;
    if (epochs) tc.max_epochs = *epochs;
    if (batch) tc.batch_size = *batch;
    if (seed) tc.seed = *seed;
  }

  std::unique_ptr<std::ofstream> open_metrics() const {
    if (metrics_path.empty()) return nullptr;
    auto out = std::make_unique<std::ofstream>(metrics_path);
    if (!*out) throw ConfigError("cannot write metrics file " + metrics_path);
    return out;
  }
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_epochs) {
  cmd->add_option("--config", opts.config_path,
                  "key = value configuration file");
  cmd->add_option("--steps", opts.steps, "override max_steps");
  if (with_epochs) cmd->add_option("--epochs", opts.epochs, "override max_epochs");
  cmd->add_option("--batch", opts.batch, "override batch_size");
  cmd->add_option("--seed", opts.seed, "random seed");
  cmd->add_option("--metrics", opts.metrics_path,
                  "write per-step metrics to this file");
}

// ---- Prediction file round trip ----------------------------------------------

json span_to_json(const csrl::corpus::Span& s) {
  return json{{"utt", s.utt}, {"start", s.start}, {"end", s.end}};
}

void write_predictions(std::ostream& out, const csrl::corpus::Dataset& data) {
  for (const auto& sample : data)
    for (const auto& frame : sample.frames) {
      json args = json::array();
      for (const auto& a : frame.arguments) {
        json ja = span_to_json(a.span);
        ja["role"] = a.role;
        args.push_back(std::move(ja));
      }
      json line{{"id", sample.dialogue.id},
                {"predicate", span_to_json(frame.predicate)},
                {"arguments", std::move(args)}};
      out << line.dump() << '\n';
    }
}

struct PredictionFrame {
  std::string id;
  csrl::corpus::Frame frame;
};

std::vector<PredictionFrame> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<PredictionFrame> out;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError(ctx + ": invalid JSON object");
    PredictionFrame pf;
    try {
      pf.id = j.at("id").get<std::string>();
      const json& p = j.at("predicate");
      pf.frame.predicate = {p.at("utt").get<int>(), p.at("start").get<int>(),
                            p.at("end").get<int>()};
      for (const json& a : j.at("arguments")) {
        csrl::corpus::Argument arg;
        arg.span = {a.at("utt").get<int>(), a.at("start").get<int>(),
                    a.at("end").get<int>()};
        arg.role = a.at("role").get<std::string>();
        pf.frame.arguments.push_back(std::move(arg));
      }
    } catch (const json::exception& e) {
      throw DataError(ctx + ": " + e.what());
    }
    out.push_back(std::move(pf));
  }
  return out;
}

// ---- Commands -----------------------------------------------------------------

int cmd_stats(const std::string& data_path) {
  csrl::corpus::Dataset data = csrl::corpus::load_dialogues(data_path);
  csrl::corpus::DatasetStats st = csrl::corpus::compute_stats(data);
  std::cout << "dialogues " << st.dialogues << '\n'
            << "utterances " << st.utterances << '\n'
            << "tokens " << st.tokens << '\n'
            << "predicates " << st.predicates << '\n'
            << "arguments " << st.arguments << '\n'
            << "cross_arguments " << st.cross_arguments << '\n'
            << std::fixed << std::setprecision(2) << "tokens_per_utterance "
            << st.tokens_per_utterance() << '\n'
            << "cross_ratio_percent " << 100.0 * st.cross_ratio() << '\n';
  return 0;
}

void report_to_stream(std::ostream& out, const csrl::eval::ScoreReport& r) {
  auto line = [&](const char* name, const csrl::eval::Bucket& b) {
    out << name << " precision=" << std::fixed << std::setprecision(4)
        << b.precision() << " recall=" << b.recall() << " f1=" << b.f1()
        << " gold=" << b.gold << " predicted=" << b.predicted
        << " matched=" << b.matched << '\n';
  };
  line("all", r.all);
  line("cross", r.cross);
  line("intra", r.intra);
}

json report_to_json(const csrl::eval::ScoreReport& r) {
  auto bucket = [](const csrl::eval::Bucket& b) {
    return json{{"precision", b.precision()},
                {"recall", b.recall()},
                {"f1", b.f1()},
                {"gold", b.gold},
                {"predicted", b.predicted},
                {"matched", b.matched}};
  };
  return json{{"f1_all", r.all.f1()},
              {"f1_cross", r.cross.f1()},
              {"f1_intra", r.intra.f1()},
              {"all", bucket(r.all)},
              {"cross", bucket(r.cross)},
              {"intra", bucket(r.intra)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual conversational semantic role labeling"};
  app.require_subcommand(1);

  // stats
  std::string stats_data;
  CLI::App* stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("--data", stats_data, "dialogue JSONL file")->required();

  // pretrain
  std::string pre_stage;
  bool pre_end2end = false;
  std::vector<std::string> pre_parallel, pre_dialogues, pre_srl;
  std::string pre_init, pre_out;
  CommonOptions pre_opts;
  CLI::App* pre = app.add_subcommand("pretrain", "run one pre-training stage");
  pre->add_option("--stage", pre_stage, "clm, sc, or pa");
  pre->add_flag("--end2end", pre_end2end,
                "train all objectives jointly instead of in stages");
  pre->add_option("--parallel", pre_parallel, "parallel corpus (max 2 files)")
      ->expected(0, 2);
  pre->add_option("--dialogues", pre_dialogues, "dialogue JSONL (max 2 files)")
      ->expected(0, 2);
  pre->add_option("--srl", pre_srl, "sentence SRL JSONL (max 2 files)")
      ->expected(0, 2);
  pre->add_option("--init", pre_init, "checkpoint to continue from");
  pre->add_option("--out", pre_out, "output checkpoint")->required();
  add_common(pre, pre_opts, /*with_epochs=*/false);

  // train
  std::string train_data, train_dev, train_init, train_out;
  bool train_freeze_lm = false;
  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "supervised dialogue SRL");
  train->add_option("--data", train_data, "training dialogue JSONL")
      ->required();
  train->add_option("--dev", train_dev, "development dialogue JSONL");
  train->add_option("--init", train_init, "checkpoint to start from");
  train->add_option("--out", train_out, "output checkpoint")->required();
  train->add_flag("--freeze-lm", train_freeze_lm,
                  "do not update the backbone");
  add_common(train, train_opts, /*with_epochs=*/true);

  // eval
  std::string eval_ckpt, eval_data, eval_predictions, eval_json;
  CLI::App* evalc = app.add_subcommand("eval", "score against gold frames");
  evalc->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  evalc->add_option("--data", eval_data, "gold dialogue JSONL")->required();
  evalc->add_option("--predictions", eval_predictions,
                    "score this prediction file instead of running a model");
  evalc->add_option("--json", eval_json, "also write the report as JSON here");

  // predict
  std::string pred_ckpt, pred_data, pred_out;
  CLI::App* pred = app.add_subcommand("predict", "emit predicted frames");
  pred->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required();
  pred->add_option("--data", pred_data, "dialogue JSONL with predicates")
      ->required();
  pred->add_option("--out", pred_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);

    if (stats->parsed()) return cmd_stats(stats_data);

    if (pre->parsed()) {
      if (pre_end2end == !pre_stage.empty())
        throw ConfigError("pass exactly one of --stage or --end2end");
      csrl::train::Stage stage =
          pre_end2end ? csrl::train::Stage::kEnd2End
                      : csrl::train::stage_from_string(pre_stage);
      if (stage == csrl::train::Stage::kCsrl)
        throw ConfigError("stage csrl is run by the train command");

      ModelConfig mcfg;
      csrl::train::TrainConfig tcfg;
      pre_opts.resolve(mcfg, tcfg);

      csrl::train::PretrainData data;
      if (!pre_parallel.empty())
        data.parallel = csrl::corpus::load_parallel(pre_parallel[0]);
      if (pre_parallel.size() > 1)
        data.parallel_b = csrl::corpus::load_parallel(pre_parallel[1]);
      if (!pre_dialogues.empty())
        data.dialogues = csrl::corpus::load_dialogues(pre_dialogues[0]);
      if (pre_dialogues.size() > 1)
        data.dialogues_b = csrl::corpus::load_dialogues(pre_dialogues[1]);
      if (!pre_srl.empty()) data.srl = csrl::corpus::load_srl(pre_srl[0]);
      if (pre_srl.size() > 1) data.srl_b = csrl::corpus::load_srl(pre_srl[1]);

      std::optional<csrl::Checkpoint> init;
      if (!pre_init.empty()) init = csrl::Checkpoint::load(pre_init);

      auto metrics = pre_opts.open_metrics();
      csrl::Checkpoint out = csrl::train::pretrain(
          stage, data, mcfg, tcfg, init ? &*init : nullptr, metrics.get());
      out.save(pre_out);
      std::cout << "saved " << pre_out << '\n';
      return 0;
    }

    if (train->parsed()) {
      ModelConfig mcfg;
      csrl::train::TrainConfig tcfg;
      tcfg.freeze_lm = train_freeze_lm;
      train_opts.resolve(mcfg, tcfg);
      if (train_freeze_lm) tcfg.freeze_lm = true;

      csrl::corpus::Dataset data = csrl::corpus::load_dialogues(train_data);
      std::optional<csrl::corpus::Dataset> dev;
      if (!train_dev.empty()) dev = csrl::corpus::load_dialogues(train_dev);

      std::optional<csrl::Checkpoint> init;
      if (!train_init.empty()) init = csrl::Checkpoint::load(train_init);

      // Without an explicit inventory or checkpoint, cover the data.
      if (!init && mcfg.roles == csrl::standard_roles()) {
        csrl::corpus::Dataset all = data;
        if (dev) all.insert(all.end(), dev->begin(), dev->end());
        mcfg.roles = csrl::corpus::inventory_for(all).roles();
      }

      auto metrics = train_opts.open_metrics();
      csrl::Checkpoint out = csrl::train::train_csrl(
          data, dev ? &*dev : nullptr, mcfg, tcfg, init ? &*init : nullptr,
          metrics.get());
      out.save(train_out);
      std::cout << "saved " << train_out << '\n';
      return 0;
    }

    if (evalc->parsed()) {
      csrl::corpus::Dataset gold = csrl::corpus::load_dialogues(eval_data);
      csrl::eval::ScoreReport report;
      if (!eval_predictions.empty()) {
        // Score a prediction file: frames match by (dialogue id, predicate).
        std::vector<PredictionFrame> preds = load_predictions(eval_predictions);
        std::map<std::pair<std::string, csrl::corpus::Span>,
                 const csrl::corpus::Frame*>
            by_key;
        for (const auto& pf : preds) {
          auto key = std::make_pair(pf.id, pf.frame.predicate);
          if (!by_key.emplace(key, &pf.frame).second)
            throw DataError("duplicate prediction for one frame in " +
                            eval_predictions);
        }
        std::vector<csrl::eval::FrameTuples> frames;
        std::set<std::pair<std::string, csrl::corpus::Span>> used;
        for (const auto& sample : gold)
          for (const auto& frame : sample.frames) {
            csrl::eval::FrameTuples ft;
            ft.gold = csrl::eval::tuples_from_frame(frame);
            auto key = std::make_pair(sample.dialogue.id, frame.predicate);
            if (auto it = by_key.find(key); it != by_key.end()) {
              ft.predicted = csrl::eval::tuples_from_frame(*it->second);
              used.insert(key);
            }
            frames.push_back(std::move(ft));
          }
        for (const auto& pf : preds) {
          auto key = std::make_pair(pf.id, pf.frame.predicate);
          if (used.count(key)) continue;
          csrl::eval::FrameTuples ft;  // predictions with no gold frame
          ft.predicted = csrl::eval::tuples_from_frame(pf.frame);
          frames.push_back(std::move(ft));
        }
        report = csrl::eval::score(frames);
      } else {
        if (eval_ckpt.empty())
          throw ConfigError("eval needs --checkpoint or --predictions");
        csrl::Checkpoint ck = csrl::Checkpoint::load(eval_ckpt);
        csrl::corpus::LabelInventory inv(ck.config.roles);
        for (const auto& sample : gold)
          for (const auto& frame : sample.frames)
            for (const auto& arg : frame.arguments)
              if (inv.role_id(arg.role) < 0)
                throw CheckpointError("data uses role " + arg.role +
                                      " unknown to the checkpoint");
        csrl::CsrlModel model(ck.config, /*seed=*/0);
        ck.load_into(model);
        report = csrl::infer::evaluate_dataset(model, gold);
      }
      report_to_stream(std::cout, report);
      if (!eval_json.empty()) {
        std::ofstream out(eval_json);
        if (!out) throw ConfigError("cannot write " + eval_json);
        out << report_to_json(report).dump(2) << '\n';
      }
      return 0;
    }

    if (pred->parsed()) {
      csrl::Checkpoint ck = csrl::Checkpoint::load(pred_ckpt);
      csrl::CsrlModel model(ck.config, /*seed=*/0);
      ck.load_into(model);
      csrl::corpus::Dataset data = csrl::corpus::load_dialogues(pred_data);
      csrl::corpus::Dataset out = csrl::infer::predict_dataset(model, data);
      if (pred_out.empty()) {
        write_predictions(std::cout, out);
      } else {
        std::ofstream f(pred_out);
        if (!f) throw ConfigError("cannot write " + pred_out);
        write_predictions(f, out);
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const StageOrderError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
