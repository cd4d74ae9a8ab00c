#include <gtest/gtest.h>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <caspar/ingest.hpp>
#include <caspar/io.hpp>
#include <caspar/rng.hpp>

using namespace caspar;
namespace fs = std::filesystem;

namespace {

SequencePanel make_panel(std::vector<std::string> seqs)
{
    SequencePanel p;
    for (std::size_t i = 0; i < seqs.size(); ++i) p.ids.push_back("s" + std::to_string(i));
    p.sequences = std::move(seqs);
    return p;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

class TempDir
{
public:
    TempDir()
    {
        path_ = fs::temp_directory_path() / ("caspar_ingest_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed())
                                             + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }

    std::string write(const std::string& name, const std::string& body) const
    {
        const auto p = path_ / name;
        std::ofstream(p) << body;
        return p.string();
    }

    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

} // namespace

TEST(Encode, AllConstantPositions)
{
    EXPECT_THROW(encode_panel(make_panel({"AAA", "AAA", "AAA"}), ones(3)), AllPositionsConstant);
}

TEST(Encode, MostFrequentResidueIsReference)
{
    const auto enc = encode_panel(make_panel({"A", "A", "C", "G"}), ones(4), PhenotypeTransform::none);
    ASSERT_EQ(enc.columns.size(), 2u);
    EXPECT_EQ(enc.columns[0].residue, 'C');
    EXPECT_EQ(enc.columns[1].residue, 'G');
    EXPECT_EQ(enc.columns[0].name(), "1C");
    Matrix expected(4, 2);
    expected << 0, 0, 0, 0, 1, 0, 0, 1;
    EXPECT_EQ(enc.dataset.X(), expected);
}

TEST(Encode, TiesBreakAlphabetically)
{
    const auto enc = encode_panel(make_panel({"K", "D", "K", "D"}), ones(4), PhenotypeTransform::none);
    ASSERT_EQ(enc.columns.size(), 1u);
    EXPECT_EQ(enc.columns[0].residue, 'K');
}

TEST(Encode, SamePositionColumnsHaveDistanceZero)
{
    // Position 1 has three residues, position 2 is constant, position 3 has two.
    const auto enc = encode_panel(make_panel({"AMV", "CMV", "GMI", "AMV"}), ones(4), PhenotypeTransform::none);
    ASSERT_EQ(enc.columns.size(), 3u);
    EXPECT_EQ(enc.columns[2].position, 3);
    EXPECT_EQ(enc.structure.distance(0, 1), 0.0);
    EXPECT_EQ(enc.structure.distance(0, 2), 2.0);
}

TEST(Encode, MissingResiduesCreateNoColumns)
{
    const auto enc = encode_panel(make_panel({"AX", "A-", "CV", "AV"}), ones(4), PhenotypeTransform::none);
    ASSERT_EQ(enc.columns.size(), 1u);
    EXPECT_EQ(enc.columns[0].position, 1);
    EXPECT_EQ(enc.dataset.X().col(0).sum(), 1.0);
}

TEST(Encode, PhenotypeTransformAndMissingRows)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto enc = encode_panel(make_panel({"AV", "CV", "AI", "AV"}), {10.0, nan, 1000.0, 0.1});
    EXPECT_EQ(enc.dropped_rows, 1u);
    EXPECT_EQ(enc.dataset.n(), 3);
    EXPECT_EQ(enc.row_ids, (std::vector<std::string>{"s0", "s2", "s3"}));
    EXPECT_NEAR(enc.dataset.y()(0), 1.0, 1e-15);
    EXPECT_NEAR(enc.dataset.y()(1), 3.0, 1e-15);
    EXPECT_NEAR(enc.dataset.y()(2), -1.0, 1e-15);
    // Dropping row s1 removes the only C, so only position 2 varies.
    EXPECT_EQ(enc.columns.size(), 1u);
    EXPECT_THROW(encode_panel(make_panel({"AV", "CV"}), {1.0, 0.0}), InvalidValue);
    EXPECT_NO_THROW(encode_panel(make_panel({"AV", "CV"}), {1.0, 0.0}, PhenotypeTransform::none));
}

TEST(Encode, PanelValidation)
{
    EXPECT_THROW(encode_panel(make_panel({"AV", "CVA"}), ones(2)), LengthMismatch);
    EXPECT_THROW(encode_panel(make_panel({"AV", "CV"}), ones(3)), LengthMismatch);
    EXPECT_THROW(encode_panel(make_panel({}), ones(0)), EmptyPanel);
    EXPECT_THROW(encode_panel(make_panel({"AB", "CV"}), ones(2)), InvalidValue);
}

TEST(Encode, RandomPanelProperties)
{
    RandomStream rng(11, {6});
    const std::string alphabet = "ACDKLMV-X";
    std::vector<std::string> seqs;
    for (int i = 0; i < 40; ++i) {
        std::string s;
        for (int k = 0; k < 30; ++k) {
            // Skew towards the first letter so most positions have a clear reference.
            s += rng.uniform() < 0.6 ? 'L' : alphabet[rng.uniform_index(alphabet.size())];
        }
        seqs.push_back(s);
    }
    const auto panel = make_panel(seqs);
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) y.push_back(1.0 + i);
    const auto enc = encode_panel(panel, y, PhenotypeTransform::none);

    std::size_t expected_cols = 0;
    for (std::size_t pos = 0; pos < 30; ++pos) {
        std::set<char> seen;
        for (const auto& s : seqs) {
            if (!is_missing_residue(s[pos])) seen.insert(s[pos]);
        }
        if (seen.size() > 1) expected_cols += seen.size() - 1;
    }
    EXPECT_EQ(enc.columns.size(), expected_cols);
    for (Index r = 0; r < enc.dataset.n(); ++r) {
        std::map<int, double> per_position;
        for (const auto& c : enc.columns) per_position[c.position] += enc.dataset.X()(r, c.column);
        for (const auto& [pos, total] : per_position) EXPECT_LE(total, 1.0);
    }

    // Reversing the rows permutes the rows of X and nothing else.
    std::vector<std::string> rev(seqs.rbegin(), seqs.rend());
    std::vector<double> yrev(y.rbegin(), y.rend());
    const auto enc_rev = encode_panel(make_panel(rev), yrev, PhenotypeTransform::none);
    ASSERT_EQ(enc_rev.columns.size(), enc.columns.size());
    EXPECT_EQ(enc_rev.dataset.X(), enc.dataset.X().colwise().reverse());
    EXPECT_EQ(enc_rev.dataset.y(), enc.dataset.y().reverse());
}

TEST(Load, JoinsOnIdAndDropsMissing)
{
    TempDir dir;
    const auto seqs = dir.write("seqs.csv", "id,sequence\n# comment\nr1,PQIT\nr2,pqiv\nr3,PKIT\nr4,PQLT\nr5,PQIT\n");
    const auto pheno = dir.write("pheno.csv", "id,drug,value\nr1,NFV,2.5\nr2,NFV,NA\nr3,NFV,10\nr5,NFV,1\n"
                                              "r4,NFV,4\nr1,SQV,3\n");
    const auto loaded = load_panel(seqs, pheno, "NFV");
    EXPECT_EQ(loaded.dropped_rows, 1u);
    EXPECT_EQ(loaded.panel.ids, (std::vector<std::string>{"r1", "r3", "r4", "r5"}));
    EXPECT_EQ(loaded.phenotype, (std::vector<double>{2.5, 10.0, 4.0, 1.0}));
    const auto sqv = load_panel(seqs, pheno, "SQV");
    EXPECT_EQ(sqv.panel.rows(), 1u);
    EXPECT_EQ(sqv.dropped_rows, 4u);
    EXPECT_THROW(load_panel(seqs, pheno, "ATV"), EmptyPanel);
}

TEST(Load, Errors)
{
    TempDir dir;
    const auto pheno = dir.write("pheno.csv", "r1,NFV,1\nr2,NFV,2\n");
    const auto dup = dir.write("dup.csv", "r1,PQ\nr1,PK\n");
    EXPECT_THROW(load_panel(dup, pheno, "NFV"), DuplicateId);
    const auto bad = dir.write("bad.csv", "r1,PQ\nr2,P?\n");
    try {
        load_panel(bad, pheno, "NFV");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    const auto seqs = dir.write("seqs.csv", "r1,PQ\nr2,PK\n");
    const auto bad_value = dir.write("bad_value.csv", "r1,NFV,1\nr2,NFV,abc\n");
    EXPECT_THROW(load_panel(seqs, bad_value, "NFV"), ParseError);
    const auto dup_pheno = dir.write("dup_pheno.csv", "r1,NFV,1\nr1,NFV,2\n");
    EXPECT_THROW(load_panel(seqs, dup_pheno, "NFV"), DuplicateId);
    EXPECT_THROW(load_panel(dir.file("missing.csv"), pheno, "NFV"), IoError);
}

TEST(Design, RoundTripIsExact)
{
    TempDir dir;
    RandomStream rng(4, {6});
    std::vector<std::string> seqs;
    for (int i = 0; i < 25; ++i) {
        std::string s;
        for (int k = 0; k < 12; ++k) s += "ACDEFG"[rng.uniform_index(6)];
        seqs.push_back(s);
    }
    std::vector<double> y;
    for (int i = 0; i < 25; ++i) y.push_back(0.1 + 7.0 * rng.uniform());
    const auto enc = encode_panel(make_panel(seqs), y);
    std::vector<std::string> names;
    std::vector<long long> positions;
    for (const auto& c : enc.columns) {
        names.push_back(c.name());
        positions.push_back(c.position);
    }
    io::write_design(dir.file("design.csv"), enc.dataset, names);
    io::write_json(dir.file("design.json"), io::design_sidecar(names, positions, &enc.columns));

    const auto back = io::read_design(dir.file("design.csv"));
    EXPECT_EQ(back.column_names, names);
    EXPECT_EQ(back.dataset.X(), enc.dataset.X());
    EXPECT_EQ(back.dataset.y(), enc.dataset.y());
    const auto s = io::read_positions(dir.file("design.json"));
    EXPECT_EQ(s.positions(), enc.structure.positions());
}
