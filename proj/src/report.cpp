#include "edgeprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "edgeprobe/error.hpp"
#include "edgeprobe/json_io.hpp"

namespace edgeprobe {

namespace {

constexpr const char* kKlConvention = "kl_nats = D(target || anchor), natural logarithm";

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// darkness in [0,1]: 0 = white, 1 = black.
std::string gray(double darkness) {
    const int v = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(darkness, 0.0, 1.0))));
    char buf[32];
    std::snprintf(buf, sizeof buf, "rgb(%d,%d,%d)", v, v, v);
    return buf;
}

class Svg {
public:
    Svg(int width, int height) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
             << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
             << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill, std::string_view tooltip = {}) {
        out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h << "\" fill=\"" << fill
             << "\" stroke=\"#999\" stroke-width=\"0.5\">";
        if (!tooltip.empty()) out_ << "<title>" << xml_escape(tooltip) << "</title>";
        out_ << "</rect>\n";
    }

    void text(double x, double y, std::string_view s, std::string_view anchor = "start") {
        out_ << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor << "\">" << xml_escape(s)
             << "</text>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
};

struct Heatmap {
    std::string title;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<double> darkness;  // rows x cols
    std::vector<std::string> tips;
};

std::string render_heatmap(const Heatmap& h) {
    constexpr int cell = 24;
    std::size_t label_chars = 0;
    for (const auto& r : h.rows) label_chars = std::max(label_chars, r.size());
    const int left = 12 + static_cast<int>(label_chars) * 7;
    const int top = 60;
    const int width = left + static_cast<int>(h.cols.size()) * cell + 20;
    const int height = top + static_cast<int>(h.rows.size()) * cell + 20;
    Svg svg(std::max(width, 320), height);
    svg.text(8, 16, h.title);
    for (std::size_t c = 0; c < h.cols.size(); ++c) {
        svg.text(left + c * cell + cell / 2.0, top - 6, h.cols[c], "middle");
    }
    for (std::size_t r = 0; r < h.rows.size(); ++r) {
        svg.text(left - 6, top + r * cell + cell * 0.65, h.rows[r], "end");
        for (std::size_t c = 0; c < h.cols.size(); ++c) {
            const auto k = r * h.cols.size() + c;
            svg.rect(left + c * cell, top + r * cell, cell, cell, gray(h.darkness[k]), h.tips[k]);
        }
    }
    return svg.finish();
}

std::string render_bar_strip(const MixDistribution& d) {
    constexpr int bar = 22;
    constexpr int plot_h = 120;
    const int left = 30;
    const int top = 40;
    const int width = left + static_cast<int>(d.p.size()) * bar + 20;
    Svg svg(std::max(width, 240), top + plot_h + 30);
    svg.text(8, 16, d.label() + "  cog=" + format_number(d.cog));
    const double peak = std::max(*std::max_element(d.p.begin(), d.p.end()), 1e-12);
    for (std::size_t l = 0; l < d.p.size(); ++l) {
        const double h = plot_h * d.p[l] / peak;
        svg.rect(left + l * bar + 2, top + plot_h - h, bar - 4, h, gray(0.25 + 0.75 * d.p[l] / peak),
                 "layer " + std::to_string(l) + ": " + format_number(d.p[l]));
        svg.text(left + l * bar + bar / 2.0, top + plot_h + 14, std::to_string(l), "middle");
    }
    return svg.finish();
}

class Writer {
public:
    explicit Writer(std::filesystem::path dir)
        : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        out.close();
        if (out.fail()) throw IoError("cannot finish " + path.string());
        written_.push_back(path);
    }

    std::vector<std::filesystem::path> take() { return std::move(written_); }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
};

}  // namespace

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string file_stem(std::string_view name) {
    std::string out(name);
    for (auto& c : out) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
        if (!ok) c = '_';
    }
    return out;
}

std::vector<std::filesystem::path> render_report(const ReportInput& input, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create report directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));
    }
    Writer w(out_dir);
    nlohmann::json report;
    report["kl_convention"] = kKlConvention;

    {
        std::string weights = "task,role,layer,weight\n";
        std::string cogs = "task,role,cog\n";
        auto& jd = report["distributions"] = nlohmann::json::array();
        for (const auto& d : input.distributions) {
            const std::string role(to_string(d.role));
            for (std::size_t l = 0; l < d.p.size(); ++l) {
                weights += d.task + "," + role + "," + std::to_string(l) + "," + format_number(d.p[l]) + "\n";
            }
            cogs += d.task + "," + role + "," + format_number(d.cog) + "\n";
            jd.push_back({{"task", d.task}, {"role", role}, {"weights", d.p}, {"cog", d.cog}});
        }
        w.write("mix_weights.csv", weights);
        w.write("cog.csv", cogs);
    }

    for (const auto& d : input.distributions) {
        w.write("mix_" + file_stem(d.task) + "_" + std::string(to_string(d.role)) + ".svg", render_bar_strip(d));
    }

    if (input.distributions.size() > 1) {
        Heatmap h;
        h.title = "Layer mixing weights (darker = higher weight, row-normalized)";
        const std::size_t n_layers = input.distributions.front().n_layers();
        for (std::size_t l = 0; l < n_layers; ++l) h.cols.push_back(std::to_string(l));
        for (const auto& d : input.distributions) {
            if (d.n_layers() != n_layers) throw ShapeError("distributions with different layer counts in one report");
            h.rows.push_back(d.label() + " (" + format_number(d.cog) + ")");
            const double peak = *std::max_element(d.p.begin(), d.p.end());
            for (std::size_t l = 0; l < n_layers; ++l) {
                h.darkness.push_back(d.p[l] / peak);
                h.tips.push_back(d.label() + " layer " + std::to_string(l) + ": " + format_number(d.p[l]));
            }
        }
        w.write("layer_mix.svg", render_heatmap(h));
    }

    if (input.anchors) {
        const auto& m = *input.anchors;
        std::string csv = std::string("# ") + kKlConvention + "\ntarget,anchor,kl_nats\n";
        Heatmap h;
        h.title = "Anchor KL D(target || anchor); darker = more similar, shade exp(-KL)";
        h.rows = m.targets;
        h.cols = m.anchors;
        for (std::size_t i = 0; i < m.targets.size(); ++i) {
            for (std::size_t j = 0; j < m.anchors.size(); ++j) {
                csv += m.targets[i] + "," + m.anchors[j] + "," + format_number(m.at(i, j)) + "\n";
                h.darkness.push_back(std::exp(-m.at(i, j)));
                h.tips.push_back(m.targets[i] + " vs " + m.anchors[j] + ": " + format_number(m.at(i, j)) + " nats");
            }
        }
        w.write("anchor_kl.csv", csv);
        w.write("anchor_kl.svg", render_heatmap(h));
        report["anchor_matrix"] = {{"targets", m.targets}, {"anchors", m.anchors}, {"kl_nats", m.kl}};
    }

    auto& js = report["similarities"] = nlohmann::json::array();
    for (const auto& s : input.similarities) {
        const std::string stem = "similarity_" + file_stem(s.sentence_id);
        std::string csv = "layer,i,j,cosine,zero_norm\n";
        for (std::size_t l = 0; l < s.n_layers; ++l) {
            for (std::size_t i = 0; i < s.n_words; ++i) {
                for (std::size_t j = 0; j < s.n_words; ++j) {
                    const bool flagged = i != j && (s.zero_norm[l][i] || s.zero_norm[l][j]);
                    csv += std::to_string(l) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
                           format_number(s.at(l, i, j)) + "," + (flagged ? "1" : "0") + "\n";
                }
            }
        }
        w.write(stem + ".csv", csv);

        // One panel per layer, side by side.
        constexpr int cell = 10;
        const int panel = static_cast<int>(s.n_words) * cell + 16;
        Svg svg(std::max(20 + static_cast<int>(s.n_layers) * panel, 240), panel + 50);
        svg.text(8, 16, "Intra-sentence cosine similarity: " + s.sentence_id);
        for (std::size_t l = 0; l < s.n_layers; ++l) {
            const double x0 = 10 + static_cast<double>(l) * panel;
            svg.text(x0, 36, "L=" + std::to_string(l));
            for (std::size_t i = 0; i < s.n_words; ++i) {
                for (std::size_t j = 0; j < s.n_words; ++j) {
                    svg.rect(x0 + j * cell, 42 + i * cell, cell, cell, gray((s.at(l, i, j) + 1.0) / 2.0));
                }
            }
        }
        w.write(stem + ".svg", svg.finish());
        js.push_back({{"sentence_id", s.sentence_id},
                      {"n_layers", s.n_layers},
                      {"n_words", s.n_words},
                      {"zero_norm_flagged", s.has_zero_norm()},
                      {"csv", stem + ".csv"}});
    }

    w.write("report.json", report.dump(2) + "\n");
    return w.take();
}

}  // namespace edgeprobe
