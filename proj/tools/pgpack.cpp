#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pgpack/optimizer.hpp"
#include "pgpack/packing.hpp"
#include "pgpack/report.hpp"

namespace fs = std::filesystem;
using namespace pgpack;

namespace {

constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SearchOptions {
    std::string preset = "fast";
    std::uint64_t seed = 7;
    std::size_t iters = 0;
    std::size_t refine_rounds = 0;
    double kl_budget = 0.0;
    double elite_frac = 0.0;
    double lmin = 0.0, lmax = 0.0;
    double tau = -1.0;
    unsigned threads = 0;
    bool verbose = false;

    SearchSettings settings(const Shape& motif, PlaneGroup g) const {
        SearchSettings s;
        if (preset == "fast") s = SearchSettings::fast();
        else if (preset == "full") s = SearchSettings::full();
        else throw UsageError("unknown preset '" + preset + "'");
        s.seed = seed;
        if (iters) s.max_iterations = iters;
        if (refine_rounds) s.refine_rounds = refine_rounds;
        if (kl_budget > 0.0) s.kl_budget = kl_budget;
        if (elite_frac > 0.0) s.elite_fraction = elite_frac;
        if (tau >= 0.0) s.tau_relative = tau / motif.circumradius;
        s.threads = threads;
        s.verbose = verbose;
        if (lmin > 0.0 || lmax > 0.0) {
            Bounds b = default_bounds(group_spec(g), motif);
            if (lmin > 0.0) b.length_min = lmin;
            if (lmax > 0.0) b.length_max = lmax;
            if (!(b.length_max > b.length_min)) throw UsageError("--lmin must be below --lmax");
            s.bounds = b;
        }
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        return s;
    }
};

Shape motif_for(int n) {
    if (n == 0) return make_disc(1.0);
    if (n < 3) throw UsageError("--n must be at least 3");
    return make_regular_ngon(n, 1.0);
}

std::vector<PlaneGroup> parse_groups(const std::vector<std::string>& names) {
    std::vector<PlaneGroup> out;
    for (const std::string& raw : names) {
        std::stringstream ss(raw);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name.empty()) continue;
            if (name == "all") {
                out.insert(out.end(), kAllGroups.begin(), kAllGroups.end());
                continue;
            }
            const auto g = parse_group(name);
            if (!g) throw UsageError("unknown plane group '" + name + "'");
            out.push_back(*g);
        }
    }
    if (out.empty()) throw UsageError("no plane group given");
    return out;
}

void write_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << text;
    }
    fs::rename(tmp, path);
}

std::string stem(PlaneGroup g, int n, std::uint64_t seed) {
    return std::string(group_name(g)) + "_" + (n == 0 ? std::string("disc") : "n" + std::to_string(n)) + "_seed" +
           std::to_string(seed);
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

Configuration read_certificate(const fs::path& path) {
    try {
        return configuration_from_json(read_json(path));
    } catch (const std::invalid_argument& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

// Best density per (group, n) over every result file in a directory.
std::map<std::pair<PlaneGroup, int>, double> collect_results(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::pair<PlaneGroup, int>, double> best;
    for (const fs::path& p : files) {
        Configuration c;
        try {
            c = configuration_from_json(read_json(p));
        } catch (const std::exception&) {
            continue;  // not a certificate
        }
        if (!verify(c).feasible) continue;
        const int n = c.motif.is_disc() ? 0 : c.motif.n;
        double& slot = best[{c.group, n}];
        slot = std::max(slot, density(c));
    }
    return best;
}

struct Job {
    PlaneGroup group;
    int n;
};

// Runs the searches, writing <stem>.json and <stem>.trace.csv per job into `out`.
std::map<std::pair<PlaneGroup, int>, double> run_jobs(const std::vector<Job>& jobs, const SearchOptions& opt,
                                                      const fs::path& out, bool announce) {
    for (const Job& j : jobs) opt.settings(motif_for(j.n), j.group);  // usage errors before any work
    std::map<std::pair<PlaneGroup, int>, double> densities;
    std::mutex lock;
    const unsigned workers = std::max(1u, std::min<unsigned>(opt.threads ? opt.threads : default_threads(),
                                                             unsigned(jobs.size())));
    SearchOptions inner = opt;
    if (jobs.size() > 1) inner.threads = std::max(1u, (opt.threads ? opt.threads : default_threads()) / workers);
    std::atomic<std::size_t> next{0};
    parallel_for(
        workers,
        [&](std::size_t) {
            for (std::size_t k = next++; k < jobs.size(); k = next++) {
                const Job& j = jobs[k];
                const Shape motif = motif_for(j.n);
                const SearchSettings s = inner.settings(motif, j.group);
                const std::string name = stem(j.group, j.n, s.seed);
                std::string line;
                try {
                    const SearchResult r = search_and_refine(motif, j.group, s);
                    write_atomic(out / (name + ".json"), result_json(r, s).dump(2) + "\n");
                    write_atomic(out / (name + ".trace.csv"), trace_csv(r.trace));
                    std::lock_guard g(lock);
                    densities[{j.group, j.n}] = r.report.density;
                    line = std::string(group_name(j.group)) + " " + shape_label(motif) + " density " +
                           truncate5(r.report.density) + " (" + std::to_string(r.report.density) + ") iterations " +
                           std::to_string(r.iterations_used) + " -> " + (out / (name + ".json")).string();
                } catch (const SearchFailure& e) {
                    line = std::string(group_name(j.group)) + " " + shape_label(motif) + " failed: " + e.what();
                }
                if (announce) {
                    std::lock_guard g(lock);
                    std::cout << line << std::endl;
                }
            }
        },
        workers);
    return densities;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Densest plane-group packings of regular polygons and discs"};
    app.require_subcommand(1);

    SearchOptions opt;
    int n = 0;
    bool disc = false;
    std::vector<std::string> group_names;
    std::string out_dir = "results";
    std::vector<int> n_values;
    std::string from_dir;
    std::string file;
    std::string svg_out;
    int cells = 3;
    double verify_tau = -1.0;

    auto add_search_flags = [&](CLI::App* c) {
        c->add_option("--seed", opt.seed, "Random seed");
        c->add_option("--preset", opt.preset, "Budget profile: fast or full")->check(CLI::IsMember({"fast", "full"}));
        c->add_option("--iters", opt.iters, "Iteration cap per run (overrides the preset)");
        c->add_option("--refine-rounds", opt.refine_rounds, "Number of neighbourhood reductions (overrides the preset)");
        c->add_option("--kl-budget", opt.kl_budget, "Initial KL trust-region radius");
        c->add_option("--elite-frac", opt.elite_frac, "Fraction of each batch used as elites");
        c->add_option("--lmin", opt.lmin, "Lower bound on cell lengths");
        c->add_option("--lmax", opt.lmax, "Upper bound on cell lengths");
        c->add_option("--tau", opt.tau, "Contact tolerance (absolute, circumradius 1)");
        c->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
        c->add_option("--out", out_dir, "Output directory");
        c->add_flag("--verbose", opt.verbose, "Progress on stderr");
    };

    CLI::App* search = app.add_subcommand("search", "Search the densest packing for one shape and one or more groups");
    auto* n_opt = search->add_option("--n", n, "Number of polygon vertices");
    auto* disc_opt = search->add_flag("--disc", disc, "Pack discs");
    n_opt->excludes(disc_opt);
    search->add_option("--group,--groups", group_names, "Plane group names, comma separated, or 'all'")->required();
    add_search_flags(search);

    CLI::App* verify_cmd = app.add_subcommand("verify", "Check a certificate and print its report");
    verify_cmd->add_option("certificate", file, "Certificate JSON")->required();
    verify_cmd->add_option("--tau", verify_tau, "Contact tolerance (default 1e-9 of the circumradius)");

    CLI::App* table = app.add_subcommand("table", "Density and rank tables over groups and shapes");
    table->add_option("--ns", n_values, "Vertex counts (0 = disc)")->delimiter(',');
    table->add_option("--groups", group_names, "Plane group names or 'all'");
    table->add_option("--from", from_dir, "Build the table from existing results instead of searching");
    add_search_flags(table);

    CLI::App* render = app.add_subcommand("render", "Draw a certificate as SVG");
    render->add_option("certificate", file, "Certificate JSON")->required();
    render->add_option("--cells", cells, "Number of cells along each lattice direction")->check(CLI::Range(1, 50));
    render->add_option("--out", svg_out, "Output SVG file (default: stdout)");

    CLI::App* ratios = app.add_subcommand("ratios", "Check density ratio identities on a results directory");
    ratios->add_option("dir", from_dir, "Directory of result JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (search->parsed()) {
            if (!disc && n_opt->count() == 0) throw UsageError("give --n or --disc");
            const int shape_n = disc ? 0 : n;
            motif_for(shape_n);
            std::vector<Job> jobs;
            for (PlaneGroup g : parse_groups(group_names)) jobs.push_back({g, shape_n});
            run_jobs(jobs, opt, out_dir, true);
            return 0;
        }
        if (verify_cmd->parsed()) {
            const Configuration c = read_certificate(file);
            if (verify_tau < 0.0) verify_tau = default_tau(c.motif);
            const PackingReport r = verify(c, verify_tau);
            std::cout << report_json(r).dump(2) << std::endl;
            return r.feasible ? 0 : 1;
        }
        if (table->parsed()) {
            const std::vector<PlaneGroup> groups =
                group_names.empty() ? std::vector<PlaneGroup>(kAllGroups.begin(), kAllGroups.end()) : parse_groups(group_names);
            std::map<std::pair<PlaneGroup, int>, double> densities;
            if (!from_dir.empty()) {
                densities = collect_results(from_dir);
                if (n_values.empty()) {
                    std::set<int> seen;
                    for (const auto& [key, d] : densities) seen.insert(key.second);
                    n_values.assign(seen.begin(), seen.end());
                }
            } else {
                if (n_values.empty()) throw UsageError("give --ns or --from");
                std::vector<Job> jobs;
                for (int v : n_values) {
                    motif_for(v);
                    for (PlaneGroup g : groups) jobs.push_back({g, v});
                }
                densities = run_jobs(jobs, opt, out_dir, opt.verbose);
            }
            const RankTable ranks = rank_table(densities, n_values, groups);
            const std::string text = density_table(densities, n_values, groups);
            std::cout << text;
            for (const auto& [g, v] : ranks.missing)
                std::cerr << "missing: " << group_name(g) << " " << (v == 0 ? std::string("disc") : std::to_string(v)) << "\n";
            const fs::path dest = from_dir.empty() ? fs::path(out_dir) : fs::path(from_dir);
            write_atomic(dest / "table.txt", text);
            write_atomic(dest / "ranks.csv", rank_csv(ranks));
            return 0;
        }
        if (render->parsed()) {
            const Configuration c = read_certificate(file);
            const std::string svg = render_svg(c, cells, cells);
            if (svg_out.empty()) std::cout << svg;
            else write_atomic(svg_out, svg);
            return 0;
        }
        if (ratios->parsed()) {
            const auto densities = collect_results(from_dir);
            bool missing = false;
            std::printf("%-22s %10s %10s %10s\n", "identity", "measured", "target", "error");
            for (const RatioCheck& c : check_ratios(densities)) {
                if (!c.measured) {
                    missing = true;
                    std::printf("%-22s %10s %10.6f %10s  missing %s/%s at n=%d\n", c.identity.name.c_str(), "-",
                                c.identity.target, "-", std::string(group_name(c.identity.numerator)).c_str(),
                                std::string(group_name(c.identity.denominator)).c_str(), c.identity.n);
                    continue;
                }
                std::printf("%-22s %10.6f %10.6f %10.6f\n", c.identity.name.c_str(), *c.measured, c.identity.target,
                            c.error());
            }
            return missing ? 1 : 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
