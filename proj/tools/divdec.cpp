// Copyright 2026 The Divdec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * divdec command line.
 *
 * Subcommands: train-toy fits and saves the n-gram model, decode runs a full
 * experiment into an output directory, evaluate recomputes metrics over
 * stored predictions, sweep tabulates a sampling-axis trade-off curve, and
 * report validates an output directory before printing its table.
 */

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "divdec/harness.hpp"

namespace {

using divdec::DecodeParams;
using divdec::Document;
using divdec::harness::ExperimentConfig;

struct TrainFlags {
  bool train = false;
  divdec::toy::NGramConfig config;
  bool summary_only = false;
};

void add_train_options(CLI::App* cmd, TrainFlags& flags, bool with_train_flag = true) {
  if (with_train_flag) {
    cmd->add_flag("--train", flags.train, "Train the n-gram model on the corpus");
  }
  cmd->add_option("--order", flags.config.order, "N-gram order, 2 to 4")
      ->capture_default_str();
  cmd->add_option("--delta", flags.config.delta, "Add-delta smoothing")
      ->capture_default_str();
  cmd->add_option("--lambda", flags.config.lambda, "Source-copy mixture weight")
      ->capture_default_str();
  cmd->add_option("--chain-bias", flags.config.chain_bias,
                  "Grounding weight toward chain tokens after [SUMMARY]")
      ->capture_default_str();
  cmd->add_flag("--summary-only", flags.summary_only,
                "Train on bare summaries instead of planned targets");
}

void add_decode_options(CLI::App* cmd, DecodeParams& params) {
  cmd->add_option("--beam-size", params.beam_size, "Beam width")->capture_default_str();
  cmd->add_option("--length-penalty-alpha", params.length_penalty_alpha,
                  "Length penalty exponent")
      ->capture_default_str();
  cmd->add_option("--temperature", params.temperature, "Softmax temperature")
      ->capture_default_str();
  cmd->add_option("--top-k", params.top_k, "Top-k cutoff; also the focus vocabulary size")
      ->capture_default_str();
  cmd->add_option("--nucleus-p", params.nucleus_p, "Nucleus mass cutoff")
      ->capture_default_str();
  cmd->add_option("--num-samples", params.num_samples, "Samples per document")
      ->capture_default_str();
  cmd->add_option("--max-len", params.max_len, "Maximum decoded length")
      ->capture_default_str();
}

void add_scorer_options(CLI::App* cmd, std::string& endpoint, double& timeout) {
  cmd->add_option("--scorer-endpoint", endpoint,
                  "External scorer URL; overrides DIVDEC_SCORER_ENDPOINT");
  cmd->add_option("--scorer-timeout", timeout, "Scorer HTTP timeout in seconds")
      ->capture_default_str();
}

std::unique_ptr<divdec::ConditionalModel> resolve_model(const std::string& model_path,
                                                        const TrainFlags& train,
                                                        const std::vector<Document>& corpus) {
  if (train.train != model_path.empty()) {
    throw divdec::ParameterError("pass exactly one of --model and --train");
  }
  if (train.train) {
    auto format = train.summary_only ? divdec::toy::TargetFormat::kSummaryOnly
                                     : divdec::toy::TargetFormat::kPlanAndSummary;
    return std::make_unique<divdec::toy::PlanNGramModel>(
        divdec::toy::train_plan_ngram(corpus, train.config, format));
  }
  return divdec::harness::load_model(model_path);
}

int run_train_toy(const std::string& corpus_path, const TrainFlags& flags,
                  const std::string& out_path) {
  std::vector<Document> corpus = divdec::harness::load_corpus(corpus_path);
  auto format = flags.summary_only ? divdec::toy::TargetFormat::kSummaryOnly
                                   : divdec::toy::TargetFormat::kPlanAndSummary;
  divdec::toy::PlanNGramModel model =
      divdec::toy::train_plan_ngram(corpus, flags.config, format);
  std::ostringstream dump;
  model.save(dump);
  divdec::harness::detail::write_text_file_atomic(out_path, dump.str());
  std::cout << "wrote " << out_path << " (vocabulary " << model.vocabulary().size()
            << ", corpus " << corpus.size() << " documents)\n";
  return 0;
}

int run_decode(ExperimentConfig config, const TrainFlags& train,
               const std::vector<std::string>& strategy_names, const DecodeParams& knobs) {
  for (const std::string& name : strategy_names) {
    DecodeParams params = knobs;
    params.strategy = divdec::parse_strategy(name);
    config.strategies.push_back(params);
  }
  if (train.train) {
    auto format = train.summary_only ? divdec::toy::TargetFormat::kSummaryOnly
                                     : divdec::toy::TargetFormat::kPlanAndSummary;
    config.train = divdec::harness::NGramTrainSpec{train.config, format};
    config.model_path.clear();
  }
  divdec::harness::ExperimentResult result = divdec::harness::run_experiment(config);
  std::cout << divdec::harness::render_report(result.aggregates).text;
  if (result.scorer_fallback) {
    std::cout << "note: external scorer unavailable, lexical proxies used\n";
  }
  if (!config.output_dir.empty()) {
    std::cout << "outputs written to " << config.output_dir << "\n";
  }
  return 0;
}

int run_evaluate(const std::string& corpus_path, const std::string& predictions_path,
                 const std::string& endpoint, double timeout, const std::string& out_dir) {
  std::vector<Document> corpus = divdec::harness::load_corpus(corpus_path);
  std::vector<divdec::harness::PredictionRecord> records =
      divdec::harness::load_predictions(predictions_path);

  std::string resolved = endpoint;
  if (resolved.empty()) {
    resolved = divdec::metrics::scorer_endpoint_from_env().value_or("");
  }
  divdec::metrics::ExternalScorerClient client({resolved, timeout});
  std::unique_ptr<divdec::metrics::PairwiseScorer> entailment;
  std::unique_ptr<divdec::metrics::PairwiseScorer> similarity;
  if (client.enabled()) {
    entailment = std::make_unique<divdec::metrics::ExternalEntailmentScorer>(&client);
    similarity = std::make_unique<divdec::metrics::ExternalSimilarityScorer>(&client);
  } else {
    entailment = std::make_unique<divdec::metrics::LexicalEntailmentScorer>();
    similarity = std::make_unique<divdec::metrics::UnigramSimilarityScorer>();
  }

  divdec::harness::ExperimentResult result;
  result.predictions = std::move(records);
  result.per_doc =
      divdec::harness::evaluate_predictions(corpus, result.predictions, *entailment, *similarity);
  result.scorer_fallback = client.fallback_used();
  if (result.scorer_fallback) {
    for (auto& report : result.per_doc) report.scorer_fallback = true;
  }

  std::vector<std::string> strategy_order;
  for (const auto& report : result.per_doc) {
    if (std::find(strategy_order.begin(), strategy_order.end(), report.strategy) ==
        strategy_order.end()) {
      strategy_order.push_back(report.strategy);
    }
  }
  for (const std::string& strategy : strategy_order) {
    std::vector<divdec::metrics::SampleSetReport> group;
    for (const auto& report : result.per_doc) {
      if (report.strategy == strategy) group.push_back(report);
    }
    result.aggregates.push_back(divdec::metrics::aggregate_report(group));
  }

  std::cout << divdec::harness::render_report(result.aggregates).text;
  if (result.scorer_fallback) {
    std::cout << "note: external scorer unavailable, lexical proxies used\n";
  }
  if (!out_dir.empty()) {
    divdec::harness::write_experiment_outputs(result, out_dir);
    divdec::harness::validate_output_dir(out_dir);
    std::cout << "outputs written to " << out_dir << "\n";
  }
  return 0;
}

int run_sweep(const ExperimentConfig& config, const std::string& model_path,
              const TrainFlags& train, const DecodeParams& base, const std::string& axis_name,
              const std::vector<double>& values, const std::string& out_dir) {
  std::vector<Document> corpus = divdec::harness::load_corpus(config.corpus_path);
  std::unique_ptr<divdec::ConditionalModel> model = resolve_model(model_path, train, corpus);

  divdec::harness::SweepAxis axis;
  if (axis_name == "nucleus_p") {
    axis = divdec::harness::SweepAxis::kNucleusP;
  } else if (axis_name == "temperature") {
    axis = divdec::harness::SweepAxis::kTemperature;
  } else {
    throw divdec::ParameterError("unknown sweep axis: " + axis_name);
  }

  divdec::harness::SweepResult result =
      divdec::harness::sweep(config, corpus, *model, base, axis, values);
  divdec::harness::RenderedReport rendered = divdec::harness::render_sweep(result);
  std::cout << rendered.text;
  if (!out_dir.empty()) {
    std::filesystem::path dir(out_dir);
    divdec::harness::detail::write_text_file_atomic((dir / "sweep.txt").string(),
                                                    rendered.text);
    divdec::harness::detail::write_text_file_atomic((dir / "sweep.csv").string(),
                                                    rendered.csv);
    std::cout << "outputs written to " << out_dir << "\n";
  }
  return 0;
}

int run_report(const std::string& dir) {
  divdec::harness::validate_output_dir(dir);
  std::ifstream in(std::filesystem::path(dir) / "report.txt");
  if (!in) throw divdec::CorpusError("cannot open report.txt under " + dir);
  std::cout << in.rdbuf();
  std::cout << "validated " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverse decoding strategies over toy conditional models"};
  app.set_config("--config");
  app.require_subcommand(1);

  // train-toy
  std::string train_corpus, train_out;
  TrainFlags train_toy_flags;
  CLI::App* train_cmd = app.add_subcommand("train-toy", "Fit and save the n-gram model");
  train_cmd->add_option("--corpus", train_corpus, "Corpus JSONL")->required();
  train_cmd->add_option("--out", train_out, "Model file to write")->required();
  add_train_options(train_cmd, train_toy_flags, /*with_train_flag=*/false);

  // decode
  ExperimentConfig decode_config;
  TrainFlags decode_train;
  DecodeParams decode_knobs;
  std::vector<std::string> decode_strategies = {"beam", "nucleus", "composition"};
  std::string decode_endpoint;
  CLI::App* decode_cmd = app.add_subcommand("decode", "Decode a corpus and score the samples");
  decode_cmd->add_option("--corpus", decode_config.corpus_path, "Corpus JSONL")->required();
  decode_cmd->add_option("--model", decode_config.model_path, "Model file to load");
  decode_cmd->add_option("--out", decode_config.output_dir, "Output directory")->required();
  decode_cmd
      ->add_option("--strategies", decode_strategies,
                   "Comma-separated strategy names: beam, temperature, top_k, nucleus, "
                   "focus, composition, composition_constrained")
      ->delimiter(',')
      ->capture_default_str();
  decode_cmd->add_option("--seed", decode_config.seed, "Sampling seed")->capture_default_str();
  decode_cmd->add_option("--workers", decode_config.workers, "Decode worker threads")
      ->capture_default_str();
  decode_cmd->add_flag("--challenge-only", decode_config.challenge_only,
                       "Keep only documents whose gold chain the source cannot support");
  add_decode_options(decode_cmd, decode_knobs);
  add_train_options(decode_cmd, decode_train);
  add_scorer_options(decode_cmd, decode_endpoint, decode_config.scorer_timeout_seconds);

  // evaluate
  std::string eval_corpus, eval_predictions, eval_out, eval_endpoint;
  double eval_timeout = 5.0;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Recompute metrics over stored predictions");
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus JSONL")->required();
  eval_cmd->add_option("--predictions", eval_predictions, "predictions.jsonl to score")
      ->required();
  eval_cmd->add_option("--out", eval_out, "Optional output directory");
  add_scorer_options(eval_cmd, eval_endpoint, eval_timeout);

  // sweep
  ExperimentConfig sweep_config;
  std::string sweep_model, sweep_axis = "nucleus_p", sweep_out, sweep_endpoint;
  TrainFlags sweep_train;
  DecodeParams sweep_base;
  std::vector<double> sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Trace a sampling-axis trade-off curve");
  sweep_cmd->add_option("--corpus", sweep_config.corpus_path, "Corpus JSONL")->required();
  sweep_cmd->add_option("--model", sweep_model, "Model file to load");
  sweep_cmd->add_option("--axis", sweep_axis, "nucleus_p or temperature")
      ->capture_default_str();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated axis values")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--out", sweep_out, "Optional output directory");
  sweep_cmd->add_option("--seed", sweep_config.seed, "Sampling seed")->capture_default_str();
  sweep_cmd->add_option("--workers", sweep_config.workers, "Decode worker threads")
      ->capture_default_str();
  add_decode_options(sweep_cmd, sweep_base);
  add_train_options(sweep_cmd, sweep_train);
  add_scorer_options(sweep_cmd, sweep_endpoint, sweep_config.scorer_timeout_seconds);

  // report
  std::string report_dir;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Validate an output directory and print its table");
  report_cmd->add_option("--dir", report_dir, "Experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      return run_train_toy(train_corpus, train_toy_flags, train_out);
    }
    if (decode_cmd->parsed()) {
      if (decode_train.train != decode_config.model_path.empty()) {
        throw divdec::ParameterError("pass exactly one of --model and --train");
      }
      if (!decode_endpoint.empty()) decode_config.scorer_endpoint = decode_endpoint;
      return run_decode(decode_config, decode_train, decode_strategies, decode_knobs);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate(eval_corpus, eval_predictions, eval_endpoint, eval_timeout, eval_out);
    }
    if (sweep_cmd->parsed()) {
      if (!sweep_endpoint.empty()) sweep_config.scorer_endpoint = sweep_endpoint;
      return run_sweep(sweep_config, sweep_model, sweep_train, sweep_base, sweep_axis,
                       sweep_values, sweep_out);
    }
    if (report_cmd->parsed()) {
      return run_report(report_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
