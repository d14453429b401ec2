#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qs/errors.hpp"
#include "qs/pipeline.hpp"
#include "qs/run_config.hpp"

namespace {

struct CommonOpts {
    std::string config_file;
    std::string profile = "desk";
    std::string out_dir;
    std::optional<uint64_t> seed;
};

qs::pipeline::RunConfig resolve_config(const CommonOpts& opts) {
    auto cfg = qs::pipeline::profile_by_name(opts.profile);
    if (!opts.config_file.empty())
        cfg = qs::pipeline::load_config_file(opts.config_file, cfg);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed) cfg.master_seed = *opts.seed;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "Config file overriding the profile");
    cmd->add_option("--profile", opts.profile, "Base profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", opts.out_dir, "Run directory (overrides config out_dir)");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides config master_seed)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transfer-learning surrogate pipeline for seismic time-history response"};
    app.require_subcommand(1);

    CommonOpts opts;
    bool ran = false;

    // One subcommand per pipeline stage.
    for (auto stage : qs::pipeline::all_stages()) {
        auto* cmd = app.add_subcommand(qs::pipeline::stage_name(stage),
                                       std::string("Run the ") +
                                           qs::pipeline::stage_name(stage) + " stage");
        add_common(cmd, opts);
        cmd->callback([&, stage]() {
            qs::pipeline::run_stage(resolve_config(opts), stage);
            ran = true;
        });
    }

    std::string through_stage;
    auto* pipe = app.add_subcommand("pipeline", "Run all stages in order");
    add_common(pipe, opts);
    pipe->add_option("--through", through_stage, "Stop after this stage");
    pipe->callback([&]() {
        std::optional<qs::pipeline::Stage> through;
        if (!through_stage.empty())
            through = qs::pipeline::stage_from_name(through_stage);
        qs::pipeline::run_pipeline(resolve_config(opts), through);
        ran = true;
    });

    auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
    add_common(show, opts);
    show->callback([&]() {
        std::fputs(qs::pipeline::serialize_config(resolve_config(opts)).c_str(), stdout);
        ran = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const qs::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", qs::error_class_name(e.cls()), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return ran ? 0 : 1;
}
