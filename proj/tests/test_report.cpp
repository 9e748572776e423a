#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "edgeprobe/error.hpp"
#include "edgeprobe/report.hpp"
#include "helpers.hpp"

using namespace edgeprobe;
using testing::TempDir;

namespace {

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

bool wrote(const std::vector<std::filesystem::path>& files, const std::string& name) {
    for (const auto& f : files) {
        if (f.filename() == name) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("empty report still writes headers") {
    TempDir dir("report");
    const auto files = render_report({}, dir / "out");
    CHECK(wrote(files, "mix_weights.csv"));
    CHECK(wrote(files, "cog.csv"));
    CHECK(wrote(files, "report.json"));
    CHECK_FALSE(wrote(files, "anchor_kl.csv"));
    CHECK(testing::slurp(dir / "out/mix_weights.csv") == "task,role,layer,weight\n");
    const auto j = nlohmann::json::parse(testing::slurp(dir / "out/report.json"));
    CHECK(j["distributions"].empty());
}

TEST_CASE("single uniform distribution") {
    TempDir dir("report");
    ReportInput in;
    in.distributions.push_back(MixDistribution::from_weights("pos", PositionRole::unary, std::vector<double>(13, 1.0 / 13)));
    const auto files = render_report(in, dir.path());
    std::size_t svgs = 0;
    for (const auto& f : files) svgs += f.extension() == ".svg";
    CHECK(svgs == 1);
    CHECK(wrote(files, "mix_pos_unary.svg"));

    const auto rows = csv_rows(testing::slurp(dir / "mix_weights.csv"));
    REQUIRE(rows.size() == 14);
    double total = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) total += std::strtod(rows[i][3].c_str(), nullptr);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    const auto cog = csv_rows(testing::slurp(dir / "cog.csv"));
    REQUIRE(cog.size() == 2);
    CHECK(cog[1] == std::vector<std::string>{"pos", "unary", "6"});
}

TEST_CASE("printed numbers survive a round trip to 9 digits") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const double x = std::exp(u(rng)) * (i % 2 ? 1 : -1);
        const double back = std::strtod(format_number(x).c_str(), nullptr);
        CHECK(std::abs(back - x) <= 5e-9 * std::abs(x));
    }
    CHECK(format_number(0.143841036) == "0.143841036");
    CHECK(file_stem("role.pb:src/x") == "role.pb_src_x");
}

TEST_CASE("anchor CSV carries the KL convention") {
    TempDir dir("report");
    ReportInput in;
    in.distributions.push_back(MixDistribution::from_weights("a", PositionRole::unary, {1.0, 0.0}));
    in.distributions.push_back(MixDistribution::from_weights("b", PositionRole::src, {0.5, 0.5}));
    in.anchors = anchor_matrix(std::span(in.distributions).first(1), std::span(in.distributions).subspan(1));
    const auto files = render_report(in, dir.path());
    CHECK(wrote(files, "layer_mix.svg"));
    CHECK(wrote(files, "anchor_kl.svg"));
    const auto csv = testing::slurp(dir / "anchor_kl.csv");
    CHECK(csv.rfind("# kl_nats = D(target || anchor)", 0) == 0);
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"target", "anchor", "kl_nats"});
    CHECK(rows[1] == std::vector<std::string>{"a unary", "b src", format_number(std::log(2.0))});
    const auto j = nlohmann::json::parse(testing::slurp(dir / "report.json"));
    CHECK(j["anchor_matrix"]["kl_nats"][0].get<double>() == std::log(2.0));
}

TEST_CASE("similarity output flags zero vectors") {
    TempDir dir("report");
    SimilarityMatrices s;
    s.sentence_id = "train-1";
    s.n_layers = 1;
    s.n_words = 2;
    s.layers = {{1.0, 0.0, 0.0, 1.0}};
    s.zero_norm = {{false, true}};
    ReportInput in;
    in.similarities.push_back(s);
    const auto files = render_report(in, dir.path());
    CHECK(wrote(files, "similarity_train-1.svg"));
    const auto rows = csv_rows(testing::slurp(dir / "similarity_train-1.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[2] == std::vector<std::string>{"0", "0", "1", "0", "1"});
    CHECK(rows[1].back() == "0");
}

TEST_CASE("unwritable destinations raise IoError") {
    TempDir dir("report");
    testing::spit(dir / "file", "x");
    CHECK_THROWS_AS(render_report({}, dir / "file" / "sub"), IoError);
}
