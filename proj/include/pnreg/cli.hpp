#pragma once

// Command-line front end: flat key=value config files, five subcommands
// (fit, sweep, rates, dof, construct), CSV emission, and hand-rolled SVG
// plots. Everything here is deterministic: the same config and seed
// produce byte-identical output files.
//
// Config format: one `key = value` pair per line, '#' starts a comment,
// blank lines ignored. Repeating a key builds a list (used for method
// names and tuning grids); reading a repeated key as a scalar is an
// error. Keys that are present but never consumed by the subcommand are
// reported as config errors so typos fail loudly.
//
// Exit codes: 0 ok, 2 config error (bad flags, bad config, bad input
// data), 3 numerical failure inside a fit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pnreg/bounds.hpp"
#include "pnreg/checkpoint.hpp"
#include "pnreg/fit.hpp"
#include "pnreg/fsio.hpp"
#include "pnreg/harness.hpp"
#include "pnreg/numkern.hpp"
#include "pnreg/splinenet.hpp"

namespace pnreg::cli {

struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' is not a number: '" + s + "'");
    }
    if (pos != s.size())
        throw config_error("config: key '" + key + "' has trailing junk: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' is not an integer: '" + s + "'");
    }
    if (pos != s.size())
        throw config_error("config: key '" + key + "' has trailing junk: '" + s + "'");
    return v;
}

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config

class Config {
  public:
    static Config parse(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = detail::trim(line.substr(0, eq));
            std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw config_error("config line " + std::to_string(lineno) + ": empty key");
            if (val.empty())
                throw config_error("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
            c.entries_.emplace_back(std::move(key), std::move(val));
        }
        c.used_.assign(c.entries_.size(), false);
        return c;
    }

    static Config load(const std::string& path) {
        std::string text;
        try {
            text = fsio::read_file(path);
        } catch (const std::exception& e) {
            throw config_error(std::string("config: cannot read ") + path + ": " + e.what());
        }
        return parse(text);
    }

    bool has(const std::string& key) const { return count(key) > 0; }

    std::size_t count(const std::string& key) const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.first == key) ++n;
        return n;
    }

    // Scalar access; a repeated key is an error here.
    std::string get(const std::string& key) const {
        const std::string* found = nullptr;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].first != key) continue;
            if (found) throw config_error("config: key '" + key + "' given more than once");
            found = &entries_[i].second;
            used_[i] = true;
        }
        if (!found) throw config_error("config: missing required key '" + key + "'");
        return *found;
    }

    std::string get(const std::string& key, const std::string& dflt) const {
        return has(key) ? get(key) : dflt;
    }

    double get_double(const std::string& key) const { return detail::parse_double(key, get(key)); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }

    long long get_int(const std::string& key) const { return detail::parse_int(key, get(key)); }
    long long get_int(const std::string& key, long long dflt) const {
        return has(key) ? get_int(key) : dflt;
    }

    std::size_t get_size(const std::string& key, std::size_t dflt) const {
        if (!has(key)) return dflt;
        long long v = get_int(key);
        if (v < 0) throw config_error("config: key '" + key + "' must be nonnegative");
        return static_cast<std::size_t>(v);
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].first != key) continue;
            out.push_back(entries_[i].second);
            used_[i] = true;
        }
        return out;
    }

    std::vector<double> list_double(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : list(key)) out.push_back(detail::parse_double(key, s));
        return out;
    }

    // Fails if any key was present but never read: catches misspelled keys.
    void require_all_used() const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (!used_[i])
                throw config_error("config: unknown or unused key '" + entries_[i].first + "'");
    }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
    mutable std::vector<bool> used_;
};

// ---------------------------------------------------------------------------
// SVG plotting: fixed 800x500 viewbox, polylines and scatter circles only.

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> pts;
    bool scatter = false;  // circles instead of a polyline
};

namespace detail {

inline const char* series_color(std::size_t i) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#8c564b"};
    return kPalette[i % 6];
}

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

inline std::string svg_plot(const std::vector<PlotSeries>& series, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel) {
    const double W = 800, H = 500, ml = 64, mr = 18, mt = 36, mb = 46;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool any = false;
    for (const auto& s : series)
        for (const auto& [x, y] : s.pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (!any) {
                xmin = xmax = x;
                ymin = ymax = y;
                any = true;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    if (!any) {
        xmin = ymin = 0;
        xmax = ymax = 1;
    }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    double xpad = 0.04 * (xmax - xmin), ypad = 0.04 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\">\n";
    o << "<rect width=\"800\" height=\"500\" fill=\"#ffffff\"/>\n";
    o << "<rect x=\"" << detail::svg_num(ml) << "\" y=\"" << detail::svg_num(mt) << "\" width=\""
      << detail::svg_num(W - ml - mr) << "\" height=\"" << detail::svg_num(H - mt - mb)
      << "\" fill=\"none\" stroke=\"#888888\"/>\n";
    o << "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">"
      << title << "</text>\n";
    o << "<text x=\"" << detail::svg_num((ml + W - mr) / 2) << "\" y=\"" << detail::svg_num(H - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel
      << "</text>\n";
    o << "<text x=\"16\" y=\"" << detail::svg_num((mt + H - mb) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 "
      << detail::svg_num((mt + H - mb) / 2) << ")\">" << ylabel << "</text>\n";
    // Corner tick labels are enough to read scales off a diagnostic plot.
    o << "<text x=\"" << detail::svg_num(ml) << "\" y=\"" << detail::svg_num(H - mb + 16)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::svg_num(xmin) << "</text>\n";
    o << "<text x=\"" << detail::svg_num(W - mr) << "\" y=\"" << detail::svg_num(H - mb + 16)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_num(xmax) << "</text>\n";
    o << "<text x=\"" << detail::svg_num(ml - 6) << "\" y=\"" << detail::svg_num(H - mb)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_num(ymin) << "</text>\n";
    o << "<text x=\"" << detail::svg_num(ml - 6) << "\" y=\"" << detail::svg_num(mt + 11)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_num(ymax) << "</text>\n";

    bool plotted = false;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = detail::series_color(i);
        if (series[i].scatter) {
            for (const auto& [x, y] : series[i].pts) {
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                o << "<circle cx=\"" << detail::svg_num(px(x)) << "\" cy=\""
                  << detail::svg_num(py(y)) << "\" r=\"1.8\" fill=\"" << color
                  << "\" fill-opacity=\"0.45\"/>\n";
                plotted = true;
            }
        } else {
            // NaN points split the polyline into segments.
            std::string seg;
            std::size_t seg_pts = 0;
            auto flush = [&]() {
                if (seg_pts >= 2) {
                    o << "<polyline points=\"" << seg << "\" fill=\"none\" stroke=\"" << color
                      << "\" stroke-width=\"1.5\"/>\n";
                    plotted = true;
                }
                seg.clear();
                seg_pts = 0;
            };
            for (const auto& [x, y] : series[i].pts) {
                if (!std::isfinite(x) || !std::isfinite(y)) {
                    flush();
                    continue;
                }
                if (!seg.empty()) seg += ' ';
                seg += detail::svg_num(px(x));
                seg += ',';
                seg += detail::svg_num(py(y));
                ++seg_pts;
            }
            flush();
        }
        double ly = mt + 16 + 16.0 * static_cast<double>(i);
        o << "<line x1=\"" << detail::svg_num(W - mr - 120) << "\" y1=\"" << detail::svg_num(ly - 4)
          << "\" x2=\"" << detail::svg_num(W - mr - 96) << "\" y2=\"" << detail::svg_num(ly - 4)
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << detail::svg_num(W - mr - 90) << "\" y=\"" << detail::svg_num(ly)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[i].label << "</text>\n";
    }
    if (!plotted)
        o << "<text x=\"400\" y=\"250\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"13\">no finite data points</text>\n";
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Problem and method construction from config

struct LoadedProblem {
    harness::RegressionProblem problem;  // csv problems use it as an x-grid carrier
    bool synthetic = true;
    Vector y;      // csv only: the observed response
    Vector truth;  // csv only: empty when the file has no truth column
};

namespace detail {

inline LoadedProblem load_csv_problem(const std::string& path) {
    std::string text;
    try {
        text = fsio::read_file(path);
    } catch (const std::exception& e) {
        throw config_error(std::string("config: cannot read data file ") + path + ": " + e.what());
    }
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw config_error("data file is empty: " + path);
    line = trim(line);
    bool has_truth = false;
    if (line == "x,y")
        has_truth = false;
    else if (line == "x,y,truth")
        has_truth = true;
    else
        throw config_error("data file " + path + ": header must be 'x,y' or 'x,y,truth'");
    LoadedProblem lp;
    lp.synthetic = false;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != (has_truth ? 3u : 2u))
            throw config_error("data file " + path + " line " + std::to_string(lineno) +
                               ": wrong column count");
        const std::string where = path + " line " + std::to_string(lineno);
        lp.problem.x_grid.push_back(parse_double(where, trim(cells[0])));
        lp.y.push_back(parse_double(where, trim(cells[1])));
        if (has_truth) lp.truth.push_back(parse_double(where, trim(cells[2])));
    }
    if (lp.y.size() < 2) throw config_error("data file " + path + ": fewer than 2 rows");
    lp.problem.name = "csv";
    lp.problem.sigma = 0.0;
    lp.problem.truth = [](double) { return std::numeric_limits<double>::quiet_NaN(); };
    return lp;
}

}  // namespace detail

inline LoadedProblem problem_from_config(const Config& cfg, std::uint64_t seed) {
    std::string kind = cfg.get("problem");
    if (kind == "csv") {
        LoadedProblem lp = detail::load_csv_problem(cfg.get("data"));
        lp.problem.seed = seed;
        return lp;
    }
    std::size_t n = cfg.get_size("n", 1000);
    LoadedProblem lp;
    if (kind == "vary")
        lp.problem = harness::gen_vary(n, cfg.get_double("sigma", 0.1), seed);
    else if (kind == "doppler")
        lp.problem = harness::gen_doppler(n, cfg.get_double("sigma", 0.4), seed);
    else
        throw config_error("config: unknown problem '" + kind + "' (expected vary, doppler, csv)");
    return lp;
}

// The pnn hyperparameters are read even when building other methods' specs
// so that one config can drive both fit and sweep.
inline harness::PnnMethodConfig pnn_config_from(const Config& cfg) {
    harness::PnnMethodConfig pc;
    pc.M = cfg.get_size("pnn.M", pc.M);
    pc.w = cfg.get_size("pnn.w", pc.w);
    pc.L = cfg.get_size("pnn.L", pc.L);
    pc.train.epochs = cfg.get_size("pnn.epochs", pc.train.epochs);
    pc.train.lr = cfg.get_double("pnn.lr", pc.train.lr);
    pc.train.grow_layerwise = cfg.get_int("pnn.grow", 0) != 0;
    pc.train.grow_epochs = cfg.get_size("pnn.grow_epochs", pc.train.grow_epochs);
    return pc;
}

inline harness::MethodSpec method_from_config(const Config& cfg, const std::string& name) {
    if (name == "tf") {
        auto grid = cfg.list_double("tf.lambda");
        if (grid.empty()) throw config_error("config: method tf needs tf.lambda");
        int order = static_cast<int>(cfg.get_int("tf.order", 3));
        return harness::make_tf_method(grid, order);
    }
    if (name == "ss") {
        auto grid = cfg.list_double("ss.lambda");
        if (grid.empty()) throw config_error("config: method ss needs ss.lambda");
        return harness::make_ss_method(grid);
    }
    if (name == "sym4") {
        auto grid = cfg.list_double("sym4.threshold");
        if (grid.empty()) throw config_error("config: method sym4 needs sym4.threshold");
        int depth = static_cast<int>(cfg.get_int("sym4.depth", -1));
        return harness::make_sym4_method(grid, depth);
    }
    if (name == "truncpow") {
        auto grid = cfg.list_double("truncpow.lambda");
        if (grid.empty()) throw config_error("config: method truncpow needs truncpow.lambda");
        int m = static_cast<int>(cfg.get_int("truncpow.m", 1));
        std::size_t units = cfg.get_size("truncpow.units", 64);
        baselines::TruncPowConfig tc;
        tc.epochs = cfg.get_size("truncpow.epochs", tc.epochs);
        tc.lr = cfg.get_double("truncpow.lr", tc.lr);
        return harness::make_truncpow_method(grid, m, units, tc);
    }
    if (name == "pnn") {
        auto grid = cfg.list_double("pnn.lambda");
        if (grid.empty()) throw config_error("config: method pnn needs pnn.lambda");
        return harness::make_pnn_method(grid, pnn_config_from(cfg));
    }
    throw config_error("config: unknown method '" + name +
                       "' (expected tf, ss, sym4, truncpow, pnn)");
}

// ---------------------------------------------------------------------------
// Command plumbing

struct Args {
    std::string sub;
    std::string config_path;
    std::string out_dir = ".";
    bool has_seed = false;
    std::uint64_t seed = 0;
    bool has_threads = false;
    std::size_t threads = 1;
};

inline Args parse_args(const std::vector<std::string>& argv) {
    Args a;
    if (argv.empty()) throw config_error("usage: pnreg <fit|sweep|rates|dof|construct> [flags]");
    a.sub = argv[0];
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& f = argv[i];
        auto next = [&]() -> const std::string& {
            if (i + 1 >= argv.size()) throw config_error("flag " + f + " needs a value");
            return argv[++i];
        };
        if (f == "--config")
            a.config_path = next();
        else if (f == "--out")
            a.out_dir = next();
        else if (f == "--seed") {
            a.seed = static_cast<std::uint64_t>(detail::parse_int("--seed", next()));
            a.has_seed = true;
        } else if (f == "--threads") {
            long long t = detail::parse_int("--threads", next());
            if (t < 1) throw config_error("--threads must be >= 1");
            a.threads = static_cast<std::size_t>(t);
            a.has_threads = true;
        } else
            throw config_error("unknown flag: " + f);
    }
    return a;
}

namespace detail {

inline std::string safe_name(const std::string& s) {
    if (s.empty()) throw config_error("config: empty experiment name");
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            throw config_error("config: experiment name may use only [a-zA-Z0-9._-]: '" + s + "'");
    return s;
}

inline std::string out_path(const Args& a, const std::string& file) {
    std::filesystem::create_directories(a.out_dir);
    return (std::filesystem::path(a.out_dir) / file).string();
}

inline std::uint64_t effective_seed(const Args& a, const Config& cfg) {
    std::uint64_t s = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    if (a.has_seed) s = a.seed;
    return s;
}

inline std::size_t effective_threads(const Args& a, const Config& cfg) {
    std::size_t t = cfg.get_size("threads", 1);
    if (a.has_threads) t = a.threads;
    if (t < 1) throw config_error("config: threads must be >= 1");
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fit: one method, one tuning value, one realization

inline int cmd_fit(const Args& a, std::ostream& out) {
    Config cfg = Config::load(a.config_path);
    std::uint64_t seed = detail::effective_seed(a, cfg);
    LoadedProblem lp = problem_from_config(cfg, seed);
    std::string name = detail::safe_name(cfg.get("name", lp.problem.name));

    auto methods = cfg.list("method");
    if (methods.size() != 1) throw config_error("fit: config must name exactly one method");
    harness::MethodSpec spec = method_from_config(cfg, methods[0]);
    if (spec.tuning.size() != 1)
        throw config_error("fit: method " + spec.name + " must have exactly one tuning value");
    (void)detail::effective_threads(a, cfg);
    cfg.require_all_used();

    Vector y = lp.synthetic ? lp.problem.sample(0) : lp.y;
    std::uint64_t fit_seed = rng_derive(seed, 1).next_u64();

    FitResult fr;
    if (spec.name == "pnn") {
        // Rebuilt inline so the trained network can be checkpointed.
        harness::PnnMethodConfig pc = pnn_config_from(cfg);
        Matrix X(y.size(), 1);
        for (std::size_t i = 0; i < y.size(); ++i) X(i, 0) = lp.problem.x_grid[i];
        auto net = pnn::make_parallel_net(pc.M, 1, pc.w, pc.L);
        Rng rng(fit_seed);
        pnn::init_he(net, rng);
        pnn::TrainConfig tc = pc.train;
        tc.weight_decay = spec.tuning[0];
        pnn::train(net, X, y, tc);
        fr.yhat = pnn::predict_batch(net, X);
        fr.tuning = spec.tuning[0];
        fr.method = "pnn";
        pnn::save_checkpoint(net, detail::out_path(a, name + "_net.json"),
                             {{"problem", lp.problem.name},
                              {"weight_decay", detail::g17(spec.tuning[0])},
                              {"seed", std::to_string(fit_seed)}});
    } else {
        fr = spec.fit(y, lp.problem, spec.tuning[0], fit_seed);
    }

    Vector truth_vals;
    if (lp.synthetic)
        truth_vals = lp.problem.truth_values();
    else
        truth_vals = lp.truth;

    std::ostringstream csv;
    csv << "x,y,truth,yhat\n";
    for (std::size_t i = 0; i < y.size(); ++i) {
        double tv = i < truth_vals.size() ? truth_vals[i]
                                          : std::numeric_limits<double>::quiet_NaN();
        csv << detail::g17(lp.problem.x_grid[i]) << ',' << detail::g17(y[i]) << ','
            << detail::g17(tv) << ',' << detail::g17(fr.yhat[i]) << '\n';
    }
    fsio::atomic_write_file(detail::out_path(a, name + "_fit.csv"), csv.str());

    std::vector<PlotSeries> series;
    PlotSeries data{"data", {}, true};
    for (std::size_t i = 0; i < y.size(); ++i) data.pts.emplace_back(lp.problem.x_grid[i], y[i]);
    series.push_back(std::move(data));
    if (!truth_vals.empty()) {
        PlotSeries t{"truth", {}, false};
        for (std::size_t i = 0; i < truth_vals.size(); ++i)
            t.pts.emplace_back(lp.problem.x_grid[i], truth_vals[i]);
        series.push_back(std::move(t));
    }
    PlotSeries f{spec.name, {}, false};
    for (std::size_t i = 0; i < y.size(); ++i)
        f.pts.emplace_back(lp.problem.x_grid[i], fr.yhat[i]);
    series.push_back(std::move(f));
    fsio::atomic_write_file(detail::out_path(a, name + "_fit.svg"),
                            svg_plot(series, name + ": " + spec.name, "x", "y"));

    double mse = std::numeric_limits<double>::quiet_NaN();
    if (!truth_vals.empty()) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double d = fr.yhat[i] - truth_vals[i];
            s += d * d;
        }
        mse = s / static_cast<double>(y.size());
    }
    out << "fit " << spec.name << " tuning=" << detail::g17(fr.tuning)
        << " mse=" << detail::g17(mse) << " dof=" << detail::g17(fr.dof_hat) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sweep: methods x tuning grids x repeats, row/aggregate CSVs, one
// MSE-vs-dof SVG per method

inline int cmd_sweep(const Args& a, std::ostream& out) {
    Config cfg = Config::load(a.config_path);
    std::uint64_t seed = detail::effective_seed(a, cfg);
    LoadedProblem lp = problem_from_config(cfg, seed);
    std::string name = detail::safe_name(cfg.get("name", lp.problem.name));
    std::size_t repeats = cfg.get_size("repeats", 10);
    std::size_t threads = detail::effective_threads(a, cfg);

    auto method_names = cfg.list("method");
    if (method_names.empty()) throw config_error("sweep: config must name at least one method");
    std::vector<harness::MethodSpec> specs;
    for (const auto& mn : method_names) specs.push_back(method_from_config(cfg, mn));

    harness::ExperimentResult result;
    if (lp.synthetic) {
        cfg.require_all_used();
        harness::ExperimentConfig ec;
        ec.problem = lp.problem;
        ec.methods = std::move(specs);
        ec.repeats = repeats;
        ec.seed = seed;
        ec.threads = threads;
        result = harness::run_experiment(ec);
    } else {
        if (repeats != 1)
            throw config_error("sweep: csv problems have one realization; set repeats = 1");
        cfg.require_all_used();
        // Single-realization sweep straight over the loaded y.
        std::size_t cell = 0;
        for (const auto& spec : specs) {
            for (double t : spec.tuning) {
                std::uint64_t fit_seed = rng_derive(seed, cell).next_u64();
                FitResult fr = spec.fit(lp.y, lp.problem, t, fit_seed);
                harness::ExperimentRow row;
                row.method = spec.name;
                row.tuning = t;
                row.repeat = 0;
                row.seed = fit_seed;
                row.dof = fr.dof_hat;
                row.active = fr.active;
                row.mse = std::numeric_limits<double>::quiet_NaN();
                if (!lp.truth.empty()) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < lp.y.size(); ++i) {
                        double d = fr.yhat[i] - lp.truth[i];
                        s += d * d;
                    }
                    row.mse = s / static_cast<double>(lp.y.size());
                }
                result.rows.push_back(row);
                harness::ExperimentAggregate ag;
                ag.method = spec.name;
                ag.tuning = t;
                ag.mse_mean = ag.mse_lo = ag.mse_hi = row.mse;
                ag.dof_mean = row.dof;
                result.aggregates.push_back(ag);
                ++cell;
            }
        }
    }

    fsio::atomic_write_file(detail::out_path(a, name + "_rows.csv"), result.rows_csv());
    fsio::atomic_write_file(detail::out_path(a, name + "_agg.csv"), result.aggregates_csv());

    for (const auto& mn : method_names) {
        PlotSeries line{mn, {}, false};
        PlotSeries marks{mn + " points", {}, true};
        std::vector<std::pair<double, double>> pts;
        for (const auto& ag : result.aggregates)
            if (ag.method == mn) pts.emplace_back(ag.dof_mean, ag.mse_mean);
        std::sort(pts.begin(), pts.end());
        line.pts = pts;
        marks.pts = pts;
        fsio::atomic_write_file(
            detail::out_path(a, name + "_" + mn + "_msedof.svg"),
            svg_plot({line, marks}, name + ": " + mn + " MSE vs dof", "dof", "mse"));
    }

    out << "sweep " << name << ": " << result.rows.size() << " rows, "
        << result.aggregates.size() << " aggregates\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rates: CSV table of depth-dependent rate exponents

inline int cmd_rates(const Args& a, std::ostream& out) {
    Config cfg = Config::load(a.config_path);
    double alpha = 0.0, d = 0.0, p = 0.0;
    double minimax = 0.0, linear = 0.0;
    if (cfg.has("m")) {
        if (cfg.has("alpha") || cfg.has("d") || cfg.has("p"))
            throw config_error("rates: give either m or (alpha, d, p), not both");
        long long m = cfg.get_int("m");
        if (m < 1) throw config_error("rates: m must be >= 1");
        bounds::RateParams rp = bounds::bv_params(static_cast<int>(m), 3.0);
        alpha = rp.alpha;
        d = rp.d;
        p = rp.p;
        minimax = bounds::minimax_exponent(static_cast<int>(m));
        linear = bounds::linear_minimax_exponent(static_cast<int>(m));
    } else {
        alpha = cfg.get_double("alpha");
        d = cfg.get_double("d");
        p = cfg.get_double("p");
        if (!(alpha > 0.0) || !(d >= 1.0) || !(p > 0.0))
            throw config_error("rates: need alpha > 0, d >= 1, p > 0");
        if (!(alpha - d / p > 1.0))
            throw config_error("rates: alpha - d/p must exceed 1 (smoothness too low "
                               "for the continuous regime)");
        minimax = bounds::mse_rate_limit(alpha, d);
        // Classical linear-estimator minimax exponent: for p < 2 the
        // effective smoothness drops to alpha - d/p + d/2.
        double ap = p < 2.0 ? alpha - d / p + d / 2.0 : alpha;
        linear = 2.0 * ap / (2.0 * ap + d);
    }
    cfg.require_all_used();

    out << "L,exponent,minimax,linear\n";
    for (int L = 3; L <= 50; ++L) {
        bounds::RateParams rp{alpha, d, p, static_cast<double>(L)};
        out << L << ',' << detail::g17(bounds::mse_rate_exponent(rp)) << ','
            << detail::g17(minimax) << ',' << detail::g17(linear) << '\n';
    }
    out << "inf," << detail::g17(bounds::mse_rate_limit(alpha, d)) << ',' << detail::g17(minimax)
        << ',' << detail::g17(linear) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// dof: noise-resampling degree-of-freedom estimates along each tuning grid

inline int cmd_dof(const Args& a, std::ostream& out) {
    Config cfg = Config::load(a.config_path);
    std::uint64_t seed = detail::effective_seed(a, cfg);
    LoadedProblem lp = problem_from_config(cfg, seed);
    if (!lp.synthetic)
        throw config_error("dof: needs a synthetic problem (fresh noise draws)");
    std::string name = detail::safe_name(cfg.get("name", lp.problem.name));
    std::size_t repeats = cfg.get_size("repeats", 20);

    auto method_names = cfg.list("method");
    if (method_names.empty()) throw config_error("dof: config must name at least one method");
    std::vector<harness::MethodSpec> specs;
    for (const auto& mn : method_names) specs.push_back(method_from_config(cfg, mn));
    (void)detail::effective_threads(a, cfg);
    cfg.require_all_used();

    std::ostringstream csv;
    csv << "method,tuning,dof,dof_iso\n";
    for (const auto& spec : specs) {
        Vector dofs;
        for (double t : spec.tuning) {
            auto fitter = [&](const Vector& y, std::uint64_t s) {
                return spec.fit(y, lp.problem, t, s).yhat;
            };
            dofs.push_back(harness::dof_estimate(fitter, lp.problem, repeats));
        }
        // Tuning grids run weak-to-strong penalty, so dof is decreasing up
        // to estimator noise; the isotonic projection removes that noise.
        Vector iso = harness::isotonic_fit(dofs, /*increasing=*/false);
        for (std::size_t i = 0; i < dofs.size(); ++i)
            csv << spec.name << ',' << detail::g17(spec.tuning[i]) << ',' << detail::g17(dofs[i])
                << ',' << detail::g17(iso[i]) << '\n';
    }
    fsio::atomic_write_file(detail::out_path(a, name + "_dof.csv"), csv.str());
    out << "dof " << name << ": " << method_names.size() << " methods, " << repeats
        << " repeats\n";
    return 0;
}

// ---------------------------------------------------------------------------
// construct: emit a B-spline atom network as a checkpoint

inline int cmd_construct(const Args& a, std::ostream& out) {
    Config cfg = Config::load(a.config_path);
    long long m = cfg.get_int("m");
    long long k = cfg.get_int("k");
    double eps = cfg.get_double("eps");
    Vector shift = cfg.list_double("shift");
    if (shift.empty()) throw config_error("construct: needs at least one shift value");
    std::string name = detail::safe_name(cfg.get("name", "bspline"));
    cfg.require_all_used();
    if (m < 1) throw config_error("construct: m must be >= 1");

    auto r = splinenet::build_bspline_net(static_cast<int>(m), static_cast<int>(k), shift,
                                          shift.size(), eps);

    // The coefficient-weighted sum folds into each part's output layer, so
    // the result serializes as an ordinary parallel network.
    pnn::ParallelNet net;
    for (std::size_t j = 0; j < r.parts.size(); ++j) {
        pnn::Subnetwork s = r.parts[j].net;
        std::size_t last = s.depth() - 1;
        for (auto& wv : s.W[last].data) wv *= r.a[j];
        for (auto& bv : s.b[last]) bv *= r.a[j];
        net.subnets.push_back(std::move(s));
    }
    std::string path = detail::out_path(a, name + "_net.json");
    pnn::save_checkpoint(net, path,
                         {{"target", "bspline"},
                          {"m", std::to_string(m)},
                          {"k", std::to_string(k)},
                          {"eps", detail::g17(eps)},
                          {"eps_achieved", detail::g17(r.epsilon)}});
    out << "construct: " << r.parts.size() << " atoms, depth " << net.depth() << ", wrote "
        << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    try {
        Args a = parse_args(argv);
        if (a.sub != "fit" && a.sub != "sweep" && a.sub != "rates" && a.sub != "dof" &&
            a.sub != "construct")
            throw config_error("unknown subcommand '" + a.sub +
                               "' (expected fit, sweep, rates, dof, construct)");
        if (a.config_path.empty())
            throw config_error(a.sub + ": --config PATH is required");
        if (a.sub == "fit") return cmd_fit(a, out);
        if (a.sub == "sweep") return cmd_sweep(a, out);
        if (a.sub == "rates") return cmd_rates(a, out);
        if (a.sub == "dof") return cmd_dof(a, out);
        return cmd_construct(a, out);
    } catch (const numerical_error& e) {
        err << "pnreg: numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "pnreg: " << e.what() << "\n";
        return 2;
    }
}

inline int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace pnreg::cli
