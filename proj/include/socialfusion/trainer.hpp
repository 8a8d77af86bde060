#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "socialfusion/checkpoint.hpp"
#include "socialfusion/evaluate.hpp"
#include "socialfusion/manifest.hpp"
#include "socialfusion/model.hpp"
#include "socialfusion/optimizer.hpp"
#include "socialfusion/sampler.hpp"

namespace socialfusion {

struct TrainConfig {
  double lr = 2e-4;
  long warmup_steps = 500;
  int batch_size = 32;
  double lambda_heatmap = -1;  // < 0: 1 / (number of jointly trained TEXT tasks)
  int epochs = 1;
  std::uint64_t seed = 7;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  // Early-stop targets evaluated on the train split at epoch ends; negative
  // disables. accuracy in percent, min_l2 in normalized coordinates.
  double target_accuracy = -1;
  double target_min_l2 = -1;
  int checkpoint_every = 1;  // epochs; 0 keeps only best/final

  void validate() const {
    if (lr <= 0 || warmup_steps < 0 || batch_size < 1 || epochs < 1)
      throw ConfigError("train: lr/warmup/batch_size/epochs must be positive");
    if (lambda_heatmap == 0 || (lambda_heatmap < 0 && lambda_heatmap != -1))
      throw ConfigError("train: lambda_heatmap must be positive (or -1 for the default)");
  }
};

enum class RegimeKind { Single, Joint, Pair };

struct Regime {
  RegimeKind kind = RegimeKind::Joint;
  std::vector<TaskUnit> units;  // all five for Joint

  static Regime parse(const std::string& s) {
    Regime r;
    if (s == "joint") {
      r.kind = RegimeKind::Joint;
      r.units = all_task_units();
      return r;
    }
    if (s.rfind("single:", 0) == 0) {
      r.kind = RegimeKind::Single;
      r.units = {unit_from_string(s.substr(7))};
      return r;
    }
    if (s.rfind("pair:", 0) == 0) {
      std::string rest = s.substr(5);
      auto comma = rest.find(',');
      if (comma == std::string::npos)
        throw ConfigError("regime pair needs two tasks, e.g. pair:LAM,GAZEFOLLOW");
      r.kind = RegimeKind::Pair;
      r.units = {unit_from_string(rest.substr(0, comma)), unit_from_string(rest.substr(comma + 1))};
      if (r.units[0] == r.units[1]) throw ConfigError("regime pair needs two distinct tasks");
      return r;
    }
    throw ConfigError("unknown regime '" + s + "' (want single:<task>, joint, or pair:<t1>,<t2>)");
  }

  std::string str() const {
    switch (kind) {
      case RegimeKind::Joint: return "joint";
      case RegimeKind::Single: return "single:" + to_string(units[0]);
      case RegimeKind::Pair: return "pair:" + to_string(units[0]) + "," + to_string(units[1]);
    }
    return "?";
  }

  std::vector<TaskId> datasets() const {
    std::vector<TaskId> out;
    for (TaskUnit u : units)
      for (TaskId t : unit_datasets(u)) out.push_back(t);
    return out;
  }

  int text_dataset_count() const {
    int n = 0;
    for (TaskId t : datasets())
      if (t != TaskId::GAZEFOLLOW) ++n;
    return n;
  }
};

struct LossRow {
  long step;
  int epoch;
  std::size_t batch;
  BatchKind kind;
  std::size_t n_items;
  double l_llm, l_heatmap, total, lr;
};

struct TrainResult {
  std::string run_dir;
  long steps = 0;
  int epochs_run = 0;
  double lambda_heatmap = 0;
  std::vector<LossRow> losses;
  nlohmann::json train_metrics;
  nlohmann::json val_metrics;  // null when the regime has no val records
};

inline double resolve_lambda(const TrainConfig& cfg, const Regime& regime) {
  if (cfg.lambda_heatmap > 0) return cfg.lambda_heatmap;
  return 1.0 / std::max(1, regime.text_dataset_count());
}

// Runs one training regime end to end: per-epoch undersample-shuffle-
// intersperse plans, AdamW with warmup+cosine, loss CSV, epoch/best/final
// checkpoints, and a final metrics pass.
inline TrainResult train(Model& model, const DatasetStore& store, const TrainConfig& cfg,
                         const Regime& regime, const std::string& run_dir) {
  cfg.validate();
  const std::vector<TaskId> datasets = regime.datasets();
  std::map<TaskId, std::size_t> sizes;
  for (TaskId t : datasets) {
    std::size_t n = store.size(t, "train");
    if (n == 0) throw ConfigError("train: no train records for " + to_string(t));
    sizes[t] = n;
  }
  const double lambda = resolve_lambda(cfg, regime);

  std::filesystem::create_directories(run_dir);
  std::filesystem::create_directories(std::filesystem::path(run_dir) / "checkpoints");
  std::ofstream loss_csv(std::filesystem::path(run_dir) / "loss.csv");
  loss_csv << "step,epoch,batch,kind,n_items,l_llm,l_heatmap,total,lr\n";

  BatchLoader loader(store, model, "train");
  AdamWConfig opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  opt_cfg.clip_norm = cfg.clip_norm;
  AdamW opt(model.trainable_params(), opt_cfg);

  // The plan shape depends only on sizes and batch size, so the step budget
  // for the cosine schedule is known upfront.
  long steps_per_epoch = static_cast<long>(plan_epoch(sizes, cfg.batch_size, 0).batches.size());
  long total_steps = steps_per_epoch * cfg.epochs;

  bool has_val = true;
  for (TaskId t : datasets) has_val = has_val && store.size(t, "val") > 0;
  double best_val = std::numeric_limits<double>::infinity();

  TrainResult res;
  res.run_dir = run_dir;
  res.lambda_heatmap = lambda;
  long step = 0;
  char buf[256];
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    JointEpochPlan plan = plan_epoch(sizes, cfg.batch_size, Rng::derive(cfg.seed, epoch));
    for (std::size_t bi = 0; bi < plan.batches.size(); ++bi) {
      Batch batch = loader.fetch(plan, bi);
      model.zero_grads();
      LossRow row{step, epoch, bi, batch.kind, 0, 0, 0, 0, lr_at_step(step, cfg.lr, cfg.warmup_steps, total_steps)};
      ad::NodePtr loss;
      if (batch.kind == BatchKind::Text) {
        row.n_items = batch.text.size();
        loss = model.text_batch_loss(batch.text);
        row.l_llm = loss->scalar();
      } else {
        row.n_items = batch.heat.size();
        auto heat = model.heatmap_batch_loss(batch.heat);
        row.l_heatmap = heat->scalar();
        loss = ad::scale(heat, lambda);
      }
      row.total = row.l_llm + lambda * row.l_heatmap;
      if (!std::isfinite(row.total))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(bi) + " (" +
                           (batch.kind == BatchKind::Text ? "text" : "heatmap") + ")");
      ad::backward(loss);
      opt.step(row.lr);
      std::snprintf(buf, sizeof(buf), "%ld,%d,%zu,%s,%zu,%.17g,%.17g,%.17g,%.17g\n", row.step,
                    row.epoch, row.batch, batch.kind == BatchKind::Text ? "text" : "heatmap",
                    row.n_items, row.l_llm, row.l_heatmap, row.total, row.lr);
      loss_csv << buf;
      res.losses.push_back(row);
      ++step;
    }
    res.epochs_run = epoch + 1;

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      std::snprintf(buf, sizeof(buf), "epoch_%04d.sfck", epoch + 1);
      save_checkpoint(model, (std::filesystem::path(run_dir) / "checkpoints" / buf).string());
    }
    if (has_val) {
      double vl = evaluate_loss(model, store, datasets, "val", lambda);
      if (vl < best_val) {
        best_val = vl;
        save_checkpoint(model,
                        (std::filesystem::path(run_dir) / "checkpoints" / "best.sfck").string());
      }
    }

    if (cfg.target_accuracy > 0 || cfg.target_min_l2 > 0) {
      nlohmann::json m = evaluate_tasks(model, store, datasets, "train");
      bool met = true;
      for (TaskId t : datasets) {
        const auto& tm = m.at(to_string(t));
        if (t == TaskId::GAZEFOLLOW) {
          if (cfg.target_min_l2 > 0) met = met && tm.at("min_l2").get<double>() <= cfg.target_min_l2;
        } else if (cfg.target_accuracy > 0) {
          met = met && tm.at("accuracy").get<double>() >= cfg.target_accuracy;
        }
      }
      if (met) {
        res.train_metrics = m;
        break;
      }
    }
  }
  res.steps = step;
  save_checkpoint(model, (std::filesystem::path(run_dir) / "checkpoints" / "final.sfck").string());
  if (res.train_metrics.is_null())
    res.train_metrics = evaluate_tasks(model, store, datasets, "train");
  {
    std::ofstream mf(std::filesystem::path(run_dir) / "metrics_train.json");
    mf << res.train_metrics.dump(2) << "\n";
  }
  if (has_val) {
    res.val_metrics = evaluate_tasks(model, store, datasets, "val");
    std::ofstream mf(std::filesystem::path(run_dir) / "metrics_val.json");
    mf << res.val_metrics.dump(2) << "\n";
  }
  return res;
}

}  // namespace socialfusion
