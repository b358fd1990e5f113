// Command-line evaluation harness: loads a JSONL dataset, runs the
// prompt-assembly / endpoint / post-processing / scoring pipeline for the
// selected task, and writes a JSON report.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ctxeval/harness.hpp"

namespace {

// Optional sidecar annex: <dataset>.annotations.json holds function tags and
// item-reference argument names for conflict checking.
ctxeval::ToolsetAnnotations sidecar_annotations(const std::filesystem::path& dataset) {
  std::filesystem::path sidecar = dataset;
  sidecar += ".annotations.json";
  if (std::filesystem::exists(sidecar)) return ctxeval::load_annotations(sidecar);
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-engineering evaluation harness for tool-calling dialogue agents"};

  ctxeval::RunConfig cfg;
  cfg.endpoint = ctxeval::endpoint_config_from_env();

  std::string dataset;
  std::string out = "report.json";
  std::string mock_script;
  bool verbose = false;

  app.add_option("--task", cfg.task, "Task: 1 tool calling, 2 dialogue, 3 both")
      ->check(CLI::Range(1, 3))
      ->required();
  app.add_option("--dataset", dataset, "JSONL dataset path")->required();
  app.add_option("--out", out, "Report output path");
  app.add_option("--base-url", cfg.endpoint.base_url, "Chat-completions endpoint base URL");
  app.add_option("--model", cfg.endpoint.model_name, "Model name sent to the endpoint");
  app.add_option("--budget-in", cfg.budget.input_limit, "Input token budget");
  app.add_option("--budget-out", cfg.budget.output_limit, "Output token budget");
  app.add_option("--eta-tool", cfg.weights.eta_tool, "Tool reward weight");
  app.add_option("--eta-dlg", cfg.weights.eta_dlg, "Dialogue reward weight");
  app.add_option("--mock", mock_script, "Serve this mock script instead of a live endpoint");
  app.add_option("--parallel", cfg.endpoint.max_parallel, "Max in-flight episodes");
  app.add_flag("--verbose", verbose, "Log payloads (API key redacted)");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.dataset_path = dataset;
    cfg.output_path = out;
    if (!mock_script.empty()) cfg.mock_script = mock_script;
    cfg.endpoint.verbose = verbose;
    cfg.annotations = sidecar_annotations(cfg.dataset_path);
    cfg.validate();

    auto result = ctxeval::run_suite(cfg);
    const auto& agg = result.report["aggregates"];
    std::cout << "episodes: " << agg["episodes"] << "  failed: " << agg["failed"]
              << "  mean_r_tool: " << agg["mean_r_tool"]
              << "  mean_r_dlg: " << agg["mean_r_dlg"]
              << "  mean_r_combined: " << agg["mean_r_combined"] << "\n"
              << "report written to " << cfg.output_path.string() << std::endl;
    return result.episodes_failed > 0 ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
