#pragma once
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>
#include <caspar/errors.hpp>
#include <caspar/linalg.hpp>
#include <caspar/structure.hpp>
#include <caspar/text.hpp>

namespace caspar {

inline constexpr std::string_view amino_acids = "ACDEFGHIKLMNPQRSTVWY";

/// 'X' and alignment gaps: no residue call at that position.
inline bool is_missing_residue(char c)
{
    return c == 'X' || c == '-' || c == '.' || c == '~';
}

inline bool is_amino_acid(char c)
{
    return amino_acids.find(c) != std::string_view::npos;
}

/// Aligned protein sequences of a common length.
struct SequencePanel
{
    std::vector<std::string> ids;
    std::vector<std::string> sequences;

    std::size_t rows() const { return sequences.size(); }
    std::size_t length() const { return sequences.empty() ? 0 : sequences.front().size(); }

    void validate() const
    {
        if (ids.size() != sequences.size()) throw LengthMismatch("panel has different numbers of ids and sequences");
        if (sequences.empty()) throw EmptyPanel("sequence panel has no rows");
        const auto len = sequences.front().size();
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            if (sequences[i].size() != len) {
                throw LengthMismatch("sequence '" + ids[i] + "' has length " + std::to_string(sequences[i].size())
                                     + ", expected " + std::to_string(len));
            }
            for (char c : sequences[i]) {
                if (!is_amino_acid(c) && !is_missing_residue(c)) {
                    throw InvalidValue("sequence '" + ids[i] + "' contains invalid residue '" + std::string(1, c) + "'");
                }
            }
        }
    }
};

/// Indicator of `residue` at 1-based `position`.
struct MutationColumn
{
    int position = 0;
    char residue = 'A';
    Index column = 0;

    std::string name() const { return std::to_string(position) + residue; }
};

enum class PhenotypeTransform
{
    none,
    log10,
};

inline PhenotypeTransform parse_transform(const std::string& s)
{
    if (s == "none") return PhenotypeTransform::none;
    if (s == "log10") return PhenotypeTransform::log10;
    throw InvalidArgument("unknown phenotype transform '" + s + "'");
}

inline std::string to_string(PhenotypeTransform t)
{
    return t == PhenotypeTransform::none ? "none" : "log10";
}

struct EncodedPanel
{
    Dataset dataset;
    std::vector<MutationColumn> columns;
    PredictorStructure structure;
    std::vector<std::string> row_ids;
    /// Rows dropped because their phenotype was missing.
    std::size_t dropped_rows = 0;
};

/**
 * Mutation-indicator design matrix.
 *
 * Per position, the observed residues (missing symbols excluded) define M
 * levels; positions with M <= 1 are dropped, otherwise the most frequent
 * residue (ties alphabetical) is the reference and the other M - 1 each get
 * a 0/1 column. Columns are ordered by position, then residue. Rows whose
 * phenotype is NaN are dropped first.
 */
inline EncodedPanel encode_panel(const SequencePanel& panel, const std::vector<double>& phenotype,
                                 PhenotypeTransform transform = PhenotypeTransform::log10)
{
    panel.validate();
    if (phenotype.size() != panel.rows()) {
        throw LengthMismatch("phenotype has " + std::to_string(phenotype.size()) + " values for "
                             + std::to_string(panel.rows()) + " sequences");
    }
    EncodedPanel out;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < panel.rows(); ++i) {
        if (std::isnan(phenotype[i])) {
            ++out.dropped_rows;
            continue;
        }
        keep.push_back(i);
    }
    if (keep.empty()) throw EmptyPanel("no sequences with a phenotype value");

    const std::size_t len = panel.length();
    for (std::size_t pos = 0; pos < len; ++pos) {
        std::array<int, 26> counts{};
        for (auto i : keep) {
            const char c = panel.sequences[i][pos];
            if (!is_missing_residue(c)) ++counts[static_cast<std::size_t>(c - 'A')];
        }
        char reference = 0;
        int best = 0;
        int levels = 0;
        for (char c : amino_acids) {
            const int k = counts[static_cast<std::size_t>(c - 'A')];
            if (k == 0) continue;
            ++levels;
            if (k > best) {
                best = k;
                reference = c;
            }
        }
        if (levels <= 1) continue;
        for (char c : amino_acids) {
            if (c == reference || counts[static_cast<std::size_t>(c - 'A')] == 0) continue;
            out.columns.push_back({static_cast<int>(pos + 1), c, static_cast<Index>(out.columns.size())});
        }
    }
    if (out.columns.empty()) throw AllPositionsConstant("no position shows more than one residue");

    const auto n = static_cast<Index>(keep.size());
    const auto p = static_cast<Index>(out.columns.size());
    Matrix X = Matrix::Zero(n, p);
    Vector y(n);
    for (Index r = 0; r < n; ++r) {
        const auto i = keep[static_cast<std::size_t>(r)];
        const auto& seq = panel.sequences[i];
        for (const auto& col : out.columns) {
            if (seq[static_cast<std::size_t>(col.position - 1)] == col.residue) X(r, col.column) = 1.0;
        }
        double v = phenotype[i];
        if (transform == PhenotypeTransform::log10) {
            if (!(v > 0.0)) {
                throw InvalidValue("log10 transform needs positive phenotype values; '" + panel.ids[i] + "' has "
                                   + std::to_string(v));
            }
            v = std::log10(v);
        }
        y(r) = v;
        out.row_ids.push_back(panel.ids[i]);
    }
    std::vector<long long> positions;
    for (const auto& col : out.columns) positions.push_back(col.position);
    out.dataset = Dataset(std::move(X), std::move(y));
    out.structure = PredictorStructure::positional(std::move(positions));
    return out;
}

struct LoadedPanel
{
    SequencePanel panel;
    std::vector<double> phenotype;
    /// Sequences without a usable value for the drug.
    std::size_t dropped_rows = 0;
};

/**
 * Reads `id,sequence` and long-format `id,drug,value` files (header lines
 * optional) and joins them on id for one drug. Missing values ("", NA) and
 * sequences with no row for the drug are dropped and counted.
 */
inline LoadedPanel load_panel(const std::string& sequence_path, const std::string& phenotype_path,
                              const std::string& drug)
{
    LoadedPanel out;
    std::set<std::string> seen;
    for (const auto& [no, line] : text::read_lines(sequence_path)) {
        const auto f = text::split(line, ',');
        if (f.size() != 2) throw ParseError(sequence_path, no, "expected 'id,sequence'");
        if (f[0] == "id") continue;
        if (f[0].empty()) throw ParseError(sequence_path, no, "empty id");
        if (!seen.insert(f[0]).second) throw DuplicateId("duplicate sequence id '" + f[0] + "'");
        std::string seq = f[1];
        for (auto& c : seq) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        for (char c : seq) {
            if (!is_amino_acid(c) && !is_missing_residue(c)) {
                throw ParseError(sequence_path, no, "invalid residue '" + std::string(1, c) + "'");
            }
        }
        out.panel.ids.push_back(f[0]);
        out.panel.sequences.push_back(std::move(seq));
    }

    std::unordered_map<std::string, double> values;
    for (const auto& [no, line] : text::read_lines(phenotype_path)) {
        const auto f = text::split(line, ',');
        if (f.size() != 3) throw ParseError(phenotype_path, no, "expected 'id,drug,value'");
        if (f[0] == "id" && f[1] == "drug") continue;
        if (f[1] != drug) continue;
        const double v = text::is_missing_token(f[2]) ? std::numeric_limits<double>::quiet_NaN()
                                                      : text::parse_double(f[2], phenotype_path, no);
        if (!values.emplace(f[0], v).second) {
            throw DuplicateId("duplicate phenotype for id '" + f[0] + "' and drug '" + drug + "'");
        }
    }

    SequencePanel joined;
    for (std::size_t i = 0; i < out.panel.ids.size(); ++i) {
        const auto it = values.find(out.panel.ids[i]);
        if (it == values.end() || std::isnan(it->second)) {
            ++out.dropped_rows;
            continue;
        }
        joined.ids.push_back(out.panel.ids[i]);
        joined.sequences.push_back(out.panel.sequences[i]);
        out.phenotype.push_back(it->second);
    }
    out.panel = std::move(joined);
    if (out.panel.rows() == 0) throw EmptyPanel("no sequences have a phenotype for drug '" + drug + "'");
    out.panel.validate();
    return out;
}

} // namespace caspar
