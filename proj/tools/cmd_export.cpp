#include "commands.hpp"

#include "psychsteer/io.hpp"

#include <iostream>

namespace psychsteer::cli {

namespace {

struct ExportOptions {
    std::string dataset_path;
    std::optional<std::string> sft_path;
    std::optional<std::string> dpo_path;
    std::string target_level = "high";
};

void run_export(const ExportOptions& options) {
    if (!options.sft_path.has_value() && !options.dpo_path.has_value()) {
        raise(errc::usage_error, "export needs --sft and/or --dpo");
    }
    std::vector<DialogueRecord> records = read_dataset(options.dataset_path);

    if (options.sft_path.has_value()) {
        std::vector<SftExample> examples = export_sft(records);
        atomic_write_file(*options.sft_path, render_sft(examples));
        std::cerr << "export: wrote " << examples.size() << " SFT examples to "
                  << *options.sft_path << "\n";
    }
    if (options.dpo_path.has_value()) {
        Level level = parse_level(options.target_level);
        std::vector<PreferencePair> pairs = export_dpo(records, level);
        atomic_write_file(*options.dpo_path, render_dpo(pairs));
        std::cerr << "export: wrote " << pairs.size() << " preference pairs to "
                  << *options.dpo_path << "\n";
    }
}

} // namespace

void register_export(CLI::App& app) {
    auto options = std::make_shared<ExportOptions>();
    CLI::App* cmd = app.add_subcommand("export", "Export a dataset to SFT/DPO training formats");
    cmd->add_option("--dataset", options->dataset_path, "Dataset JSONL input")->required();
    cmd->add_option("--sft", options->sft_path, "SFT JSONL output");
    cmd->add_option("--dpo", options->dpo_path, "DPO preference-pair JSONL output");
    cmd->add_option("--target-level", options->target_level,
                    "Chosen side for DPO pairs: high | low (default high)");
    cmd->callback([options]() { run_export(*options); });
}

} // namespace psychsteer::cli
