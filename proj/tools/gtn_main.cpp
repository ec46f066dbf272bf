// SPDX-License-Identifier: Apache-2.0
//
// Batch experiment CLI. Subcommands:
//   run            full pipeline (teachers, distillations, reports)
//   train-teacher  one teacher training
//   distill        one distillation job
//   search         architecture searches under the configured budgets
//   report         rebuild report files from persisted cells

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gtn/checkpoint.hpp"
#include "gtn/distill.hpp"
#include "gtn/nas.hpp"
#include "gtn/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed_override = -1;
};

gtn::ExperimentConfig load(const CommonArgs& args) {
  gtn::ExperimentConfig cfg = gtn::load_config(args.config_path);
  if (args.seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(args.seed_override)};
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--seed", args.seed_override, "override the config seed list with one seed");
  cmd->add_option("--out", args.out_dir, "output directory override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generic-teacher distillation experiments"};
  app.require_subcommand(1);

  CommonArgs run_args, teacher_args, distill_args, search_args, report_args;

  CLI::App* cmd_run = app.add_subcommand("run", "run the full experiment pipeline");
  add_common(cmd_run, run_args);

  CLI::App* cmd_teacher = app.add_subcommand("train-teacher", "train a single teacher");
  add_common(cmd_teacher, teacher_args);
  std::string teacher_method = "gtn";
  int sftn_reference = 0;
  std::string teacher_out = "teacher.gtn";
  cmd_teacher->add_option("--method", teacher_method, "vanilla | sftn | gtn")
      ->check(CLI::IsMember({"vanilla", "sftn", "gtn"}));
  cmd_teacher->add_option("--reference", sftn_reference, "pool index of the sftn reference student");
  cmd_teacher->add_option("--checkpoint", teacher_out, "checkpoint file to write");

  CLI::App* cmd_distill = app.add_subcommand("distill", "distill one pool student");
  add_common(cmd_distill, distill_args);
  int student_index = 0;
  std::string kd_method = "vanilla";
  std::string teacher_ckpt;
  cmd_distill->add_option("--student", student_index, "pool index of the student")->required();
  cmd_distill->add_option("--kd", kd_method, "none | vanilla | dkd")
      ->check(CLI::IsMember({"none", "vanilla", "dkd"}));
  cmd_distill->add_option("--teacher", teacher_ckpt, "teacher checkpoint (omit for --kd none)");

  CLI::App* cmd_search = app.add_subcommand("search", "run the budgeted architecture searches");
  add_common(cmd_search, search_args);

  CLI::App* cmd_report = app.add_subcommand("report", "rebuild reports from persisted cells");
  add_common(cmd_report, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      const gtn::ExperimentConfig cfg = load(run_args);
      const gtn::ExperimentReport report = gtn::run_pipeline(cfg);
      std::cout << report.render_text();
      std::cout << "\nwrote " << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
      return 0;
    }

    if (cmd_teacher->parsed()) {
      const gtn::ExperimentConfig cfg = load(teacher_args);
      gtn::TrainConfig tc = cfg.train;
      tc.seed = cfg.seeds.front();
      gtn::Dataset data = gtn::make_dataset(cfg.dataset, cfg.seeds.front());
      gtn::TrainResult result;
      if (teacher_method == "vanilla") {
        result = gtn::train_vanilla(tc, cfg.teacher, data.train);
      } else if (teacher_method == "gtn") {
        result = gtn::train_gtn(tc, cfg.teacher, cfg.supernet, data.train);
      } else {
        result = gtn::train_sftn(tc, cfg.teacher, cfg.supernet,
                                 cfg.pool.at(static_cast<std::size_t>(sftn_reference)), data.train);
      }
      const double acc = gtn::evaluate(result.teacher, data.test) * 100.0;
      gtn::save_checkpoint(result.teacher, teacher_out);
      std::cout << "teacher " << teacher_method << ": test acc " << acc << "%  time "
                << result.seconds << "s  -> " << teacher_out << "\n";
      return 0;
    }

    if (cmd_distill->parsed()) {
      const gtn::ExperimentConfig cfg = load(distill_args);
      gtn::Dataset data = gtn::make_dataset(cfg.dataset, cfg.seeds.front());
      gtn::DistillJob job;
      job.method = gtn::kd_method_from_name(kd_method);
      job.student_arch = cfg.pool.at(static_cast<std::size_t>(student_index));
      job.pool = cfg.supernet;
      job.cfg = cfg.train;
      job.cfg.seed = cfg.seeds.front();
      gtn::TeacherNet teacher;
      if (job.method != gtn::KdMethod::kNone) {
        if (teacher_ckpt.empty()) {
          std::cerr << "--teacher is required unless --kd none\n";
          return 2;
        }
        teacher = gtn::load_checkpoint(teacher_ckpt);
        job.teacher = &teacher;
      }
      const gtn::DistillResult result = gtn::distill(job, data);
      std::cout << "student s" << student_index << " (" << kd_method << "): test acc "
                << result.test_accuracy * 100.0 << "%  time " << result.seconds << "s\n";
      return 0;
    }

    if (cmd_search->parsed()) {
      const gtn::ExperimentConfig cfg = load(search_args);
      if (!cfg.nas.enabled) {
        std::cerr << "config has no nas section\n";
        return 2;
      }
      gtn::Dataset data = gtn::make_dataset(cfg.dataset, cfg.seeds.front());
      gtn::TrainConfig tc = cfg.train;
      tc.epochs = cfg.nas.epochs;
      const auto variants =
          gtn::budget_variants(cfg.nas.supernet, data, cfg.nas.budgets, tc, cfg.nas.seeds.front());
      const char* names[] = {"nas-l", "nas-m", "nas-s"};
      for (int i = 0; i < 3; ++i) {
        std::cout << names[i] << ": [";
        for (std::size_t l = 0; l < variants[static_cast<std::size_t>(i)].size(); ++l) {
          std::cout << (l ? "," : "") << variants[static_cast<std::size_t>(i)][l];
        }
        std::cout << "]  params="
                  << gtn::student_param_count(cfg.nas.supernet, variants[static_cast<std::size_t>(i)],
                                              data.input_dim(), data.classes)
                  << "\n";
      }
      return 0;
    }

    if (cmd_report->parsed()) {
      const gtn::ExperimentConfig cfg = load(report_args);
      const auto cells = gtn::read_cells((fs::path(cfg.out_dir) / "cells.jsonl").string());
      if (cells.empty()) {
        std::cerr << "no cells found under " << cfg.out_dir << "\n";
        return 2;
      }
      const gtn::ExperimentReport report = gtn::build_report(cfg, cells);
      gtn::write_report_files(cfg, report);
      std::cout << report.render_text();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
