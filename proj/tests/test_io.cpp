#include "ssr/io.hpp"

#include "doctest.h"

#include <filesystem>

using namespace ssr;

TEST_CASE("format_double round-trips")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("matrix json")
{
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6.5;
    const json j = matrix_to_json(m);
    CHECK(j["rows"] == 2);
    CHECK(j["data"][5] == 6.5);
    CHECK(matrix_from_json(j) == m);
    json bad = j;
    bad["data"].erase(0);
    CHECK_THROWS_AS(matrix_from_json(bad), FormatError);
}

TEST_CASE("matrix csv")
{
    Matrix m(2, 2);
    m << 0.25, -1, 1e-20, 3;
    const std::string text = matrix_to_csv(m);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.back() == '\n');
    CHECK(matrix_from_csv(text) == m);
    CHECK(matrix_from_csv("1,2\r\n3,4\r\n") == matrix_from_csv("1,2\n3,4"));
    CHECK_THROWS_AS(matrix_from_csv("1,2\n3\n"), FormatError);
    CHECK_THROWS_AS(matrix_from_csv("1,abc\n"), FormatError);
    CHECK_THROWS_AS(matrix_from_csv(""), FormatError);
    CHECK_THROWS_AS(matrix_from_csv("1,2\n", 2, 2), FormatError);
}

TEST_CASE("files are written atomically into new directories")
{
    const auto dir = std::filesystem::temp_directory_path() / "ssr_io_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_text_file(dir / "a.txt", "hello\n");
    CHECK(read_text_file(dir / "a.txt") == "hello\n");
    CHECK_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
    CHECK_THROWS(read_text_file(dir / "missing.txt"));
    std::filesystem::remove_all(dir.parent_path());
}

TEST_CASE("decision and plan json")
{
    Matrix s(1, 2);
    s << std::log(2.0), 0;
    const json d = decision_to_json(softmax_route({s}, 2));
    CHECK(d["branch"] == "Softmax");
    CHECK(d["tokens"][0]["support"] == json::array({0, 1}));
    CHECK(d["tokens"][0]["weights"][0].get<double>() == doctest::Approx(2.0 / 3.0));

    CostMatrix c;
    c.values = Matrix::Identity(2, 2);
    const SinkhornResult r = sinkhorn_maxcost(c, {1.0, 1e-12, 100, true});
    const json p = plan_to_json(*r.plan);
    CHECK(p["rows"] == 2);
    CHECK(p.contains("log_u"));
    const json diag = diagnostics_to_json(r.diagnostics);
    CHECK(diag["converged"] == true);
    CHECK(diag.contains("iterations_used"));
}

TEST_CASE("train records csv schema")
{
    TrainRecord r;
    r.step = 3;
    r.loss = 0.5;
    r.branch = Branch::Sinkhorn;
    r.load.entropy_topk = 0.75;
    const std::string csv = train_records_csv({r});
    CHECK(csv.rfind(std::string(kTrainCsvHeader) + "\n", 0) == 0);
    const std::string row = csv.substr(csv.find('\n') + 1);
    CHECK(row.rfind("3,0.5,0,Sinkhorn,0.75,", 0) == 0);
    CHECK(std::count(row.begin(), row.end(), ',') == 6);
}

TEST_CASE("checkpoint round trip")
{
    Rng rng(3);
    const MoEBlock block = MoEBlock::random(3, 4, {}, rng);
    const json j = checkpoint_to_json(block);
    const MoEBlock back = block_from_checkpoint(json::parse(j.dump()));
    CHECK(back.gate == block.gate);
    CHECK(back.experts[2].w2 == block.experts[2].w2);
    CHECK(back.experts[0].b1 == block.experts[0].b1);
    json bad = j;
    bad["format"] = "other";
    CHECK_THROWS(block_from_checkpoint(bad));
}
