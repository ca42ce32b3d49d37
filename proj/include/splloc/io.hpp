#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::io {

using ResultsMap = std::map<std::string, std::vector<Segment>>;

// Loads a corpus directory: one subdirectory per video containing
// appearance.csv, motion.csv (T rows x D comma-separated reals), points.json
// and optional gt.json. Validates every domain invariant; throws ParseError
// (with file and line) or ValidationError.
Corpus load_corpus(const std::filesystem::path& dir);

// Writes a corpus in the layout load_corpus reads.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Deterministic results.json: videos sorted by id, proposals by confidence
// descending (ties by start, end, category).
void dump_results(const ResultsMap& proposals, const std::filesystem::path& file);
ResultsMap load_results(const std::filesystem::path& file);

ResultsMap ground_truth_map(const Corpus& corpus);

// Memory bank snapshot for inspection and test fixtures.
void dump_bank(const MemoryBank& bank, const std::filesystem::path& file);
MemoryBank load_bank(const std::filesystem::path& file);

// Per-video pseudo labels as arrays of "P:<cat>" / "N" / "U".
void dump_pseudo_labels(const std::map<std::string, PseudoLabelSeq>& labels, const std::filesystem::path& file);
std::map<std::string, PseudoLabelSeq> load_pseudo_labels(const std::filesystem::path& file);

}  // namespace splloc::io
