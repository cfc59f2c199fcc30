#include <CLI11.hpp>
#include <iostream>

#include "tomo/error.hpp"
#include "tomo/pipeline.hpp"

namespace {

enum Exit : int { ok = 0, config_error = 2, runtime_error = 3, io_error = 4 };

template <class F>
int guarded(F&& body) {
    try {
        body();
        return ok;
    } catch (const tomo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const tomo::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime_error;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tomographic reconstruction pipelines"};
    app.require_subcommand(1);

    std::string config;
    std::vector<std::string> overrides;
    int threads = 0;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "Validate and execute a pipeline config");
    run->add_option("config", config, "Pipeline config (JSON)")->required();
    run->add_option("--set", overrides, "Override a leaf by dotted path, e.g. recon.iterations=200")
        ->allow_extra_args(false);
    auto* threads_opt = run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = run->add_option("--seed", seed, "Noise seed");
    bool quiet = false;
    run->add_flag("-q,--quiet", quiet, "Suppress timing and metrics log");

    std::string schematic;
    auto* geom = app.add_subcommand("geom", "Report the acquisition geometry of a config");
    geom->add_option("config", config, "Pipeline config (JSON)")->required();
    geom->add_option("--set", overrides, "Override a leaf by dotted path")->allow_extra_args(false);
    geom->add_option("--png", schematic, "Write a top-view schematic PNG");

    app.add_subcommand("formats", "List supported formats, stages and solvers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : config_error;
    }

    if (*run) {
        return guarded([&] {
            tomo::PipelineOptions options;
            options.overrides = overrides;
            if (*threads_opt) options.threads = threads;
            if (*seed_opt) options.seed = seed;
            if (!quiet) options.log = &std::cout;
            const auto result = tomo::run_pipeline(config, options);
            if (!quiet)
                for (const auto& p : result.outputs) std::cout << "wrote " << p.string() << "\n";
        });
    }
    if (*geom) {
        return guarded([&] {
            std::cout << tomo::describe_geometry(config, overrides,
                                                 schematic.empty() ? std::nullopt
                                                                   : std::optional<std::filesystem::path>(schematic));
        });
    }
    std::cout << tomo::describe_formats();
    return ok;
}
