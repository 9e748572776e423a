#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgeprobe/task.hpp"

namespace edgeprobe {

enum class Formalism { propbank, verbnet, framenet };

std::string_view formalism_tag(Formalism f);  // "pb", "vn", "fn"

struct Word {
    std::string form;
    std::string lemma;
    std::string pos;
    std::optional<std::uint32_t> head;  // 0-based word index; nullopt for the root
    std::string deprel;
};

struct RoleArgument {
    std::uint32_t word = 0;
    std::optional<std::string> propbank;
    std::optional<std::string> verbnet;
    std::optional<std::string> framenet;

    const std::optional<std::string>& label(Formalism f) const;
};

struct Predicate {
    std::uint32_t word = 0;
    std::vector<RoleArgument> arguments;
};

struct SprRecord {
    std::string sentence_id;
    std::uint32_t predicate = 0;
    std::uint32_t argument = 0;
    std::string property;  // canonical dotted form, e.g. "change.of.location"
    double value = 0.0;
};

struct AnnotatedSentence {
    std::string id;
    std::vector<Word> words;
    std::vector<Predicate> predicates;
    bool has_extended_roles = false;  // VN-APRED / FN-APRED columns present
    std::vector<SprRecord> spr;

    // Single root, no cycles, every head and argument index in range.
    void validate() const;
};

struct Corpus {
    std::vector<AnnotatedSentence> train;
    std::vector<AnnotatedSentence> dev;
    std::vector<AnnotatedSentence> test;

    std::vector<AnnotatedSentence>& operator[](Split s);
    const std::vector<AnnotatedSentence>& operator[](Split s) const;
};

enum class EntailmentLabel { entailment, contradiction, neutral };

std::string_view to_string(EntailmentLabel label);

struct SentencePairRecord {
    std::string pair_id;
    std::string premise;
    std::string hypothesis;
    EntailmentLabel label = EntailmentLabel::neutral;
};

// The eleven proto-role properties in canonical dotted form.
const std::array<std::string_view, 11>& spr_properties();

// CoNLL-2009 rows: ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL
// PDEPREL FILLPRED PRED, then one APRED column per predicate, optionally
// followed by one VN-APRED and one FN-APRED column per predicate. A
// "# sent_id = X" comment names the following sentence; otherwise sentences
// are named "<file stem>-<n>" with n counting from 1.
std::vector<AnnotatedSentence> parse_conll(std::istream& in, std::string_view source_name);
std::vector<AnnotatedSentence> parse_conll(const std::filesystem::path& path);

// Tab-separated: sentence_id, predicate index, argument index, property, value.
// Indices are 0-based word positions; values are on the 1..5 scale.
std::vector<SprRecord> parse_spr(std::istream& in, std::string_view source_name);
std::vector<SprRecord> parse_spr(const std::filesystem::path& path);
void attach_spr(Corpus& corpus, const std::vector<SprRecord>& records);

// Tab-separated: premise, hypothesis, label. Pairs are named "<file stem>-<n>".
std::vector<SentencePairRecord> parse_xnli(std::istream& in, std::string_view source_name);
std::vector<SentencePairRecord> parse_xnli(const std::filesystem::path& path);

struct ExtractConfig {
    std::size_t max_labels = kDefaultMaxLabels;  // applies to the ttype and lex.unit vocabularies
    std::uint32_t max_position = 20;              // token.ix only covers words at positions 1..max_position
};

bool is_known_task(std::string_view task_name);

// Builds one probing dataset from a split corpus. Classification datasets come
// back with their label vocabulary installed and out-of-vocabulary examples dropped.
Dataset extract_task(const Corpus& corpus, std::string_view task_name, const ExtractConfig& config = {});

struct PairSplits {
    std::vector<SentencePairRecord> train;
    std::vector<SentencePairRecord> dev;
    std::vector<SentencePairRecord> test;
};

// Sentence-arity dataset: src is the sentence representation slot, no tgt.
Dataset extract_xnli(const PairSplits& pairs);

}  // namespace edgeprobe
