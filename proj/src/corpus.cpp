#include "edgeprobe/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <tuple>
#include <unordered_map>

#include "edgeprobe/error.hpp"

namespace edgeprobe {

namespace {

constexpr std::size_t kFixedColumns = 14;
constexpr std::size_t kHeadColumn = 8;
constexpr std::size_t kDeprelColumn = 10;
constexpr std::size_t kFillPredColumn = 12;

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim_cr(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

template <typename T>
std::optional<T> parse_number(std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

std::string default_id(std::string_view source_name, std::size_t ordinal) {
    return std::filesystem::path(source_name).stem().string() + "-" + std::to_string(ordinal);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::optional<std::string> role_cell(std::string_view cell) {
    if (cell == "_" || cell.empty()) return std::nullopt;
    return std::string(cell);
}

struct PendingSentence {
    std::string id;
    std::size_t first_line = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line, cells)
};

AnnotatedSentence build_sentence(const PendingSentence& pending, std::string_view source) {
    const std::string src(source);
    AnnotatedSentence sent;
    sent.id = pending.id;

    const std::size_t width = pending.rows.front().second.size();
    std::vector<std::uint32_t> pred_words;
    for (std::size_t i = 0; i < pending.rows.size(); ++i) {
        const auto& [line, cells] = pending.rows[i];
        if (cells.size() != width) {
            throw ParseError(src, line, "ragged row: " + std::to_string(cells.size()) + " columns, expected " +
                                            std::to_string(width));
        }
        if (cells.size() < kFixedColumns) {
            throw ParseError(src, line, "row has " + std::to_string(cells.size()) + " columns, need at least " +
                                            std::to_string(kFixedColumns));
        }
        const auto id = parse_number<std::uint32_t>(cells[0]);
        if (!id || *id != i + 1) {
            throw ParseError(src, line, "token id '" + cells[0] + "' out of sequence");
        }
        const auto head = parse_number<std::uint32_t>(cells[kHeadColumn]);
        if (!head) throw ParseError(src, line, "non-numeric head '" + cells[kHeadColumn] + "'");
        if (*head > pending.rows.size()) {
            throw ParseError(src, line, "dangling head " + std::to_string(*head));
        }
        Word w;
        w.form = cells[1];
        w.lemma = cells[2];
        w.pos = cells[4];
        if (*head != 0) w.head = *head - 1;
        w.deprel = cells[kDeprelColumn];
        sent.words.push_back(std::move(w));
        if (cells[kFillPredColumn] == "Y") pred_words.push_back(static_cast<std::uint32_t>(i));
    }

    const std::size_t n_pred = pred_words.size();
    const std::size_t extra = width - kFixedColumns;
    const std::size_t first_line = pending.rows.front().first;
    if (extra == n_pred) {
        sent.has_extended_roles = false;
    } else if (extra == 3 * n_pred) {
        sent.has_extended_roles = n_pred > 0;
    } else {
        throw ParseError(src, first_line,
                         "ragged sentence: " + std::to_string(extra) + " argument columns for " +
                             std::to_string(n_pred) + " predicates");
    }

    for (std::size_t p = 0; p < n_pred; ++p) {
        Predicate pred;
        pred.word = pred_words[p];
        for (std::size_t i = 0; i < pending.rows.size(); ++i) {
            const auto& cells = pending.rows[i].second;
            RoleArgument arg;
            arg.word = static_cast<std::uint32_t>(i);
            arg.propbank = role_cell(cells[kFixedColumns + p]);
            if (sent.has_extended_roles) {
                arg.verbnet = role_cell(cells[kFixedColumns + n_pred + p]);
                arg.framenet = role_cell(cells[kFixedColumns + 2 * n_pred + p]);
            }
            if (arg.propbank || arg.verbnet || arg.framenet) pred.arguments.push_back(std::move(arg));
        }
        sent.predicates.push_back(std::move(pred));
    }

    try {
        sent.validate();
    } catch (const ValidationError& e) {
        throw ParseError(src, first_line, e.what());
    }
    return sent;
}

//
// task extraction helpers
//

struct TaskShape {
    TaskKind kind;
    Arity arity;
};

std::optional<std::string> spr_property_of(std::string_view task_name) {
    constexpr std::string_view prefix = "spr.";
    if (!task_name.starts_with(prefix)) return std::nullopt;
    const auto prop = task_name.substr(prefix.size());
    const auto& known = spr_properties();
    if (std::find(known.begin(), known.end(), prop) == known.end()) return std::nullopt;
    return std::string(prop);
}

std::optional<Formalism> role_formalism_of(std::string_view task_name) {
    if (task_name == "role.pb") return Formalism::propbank;
    if (task_name == "role.vn") return Formalism::verbnet;
    if (task_name == "role.fn") return Formalism::framenet;
    return std::nullopt;
}

std::optional<TaskShape> shape_of(std::string_view name) {
    if (name == "token.ix") return TaskShape{TaskKind::regression, Arity::unary};
    if (name == "ttype" || name == "lex.unit" || name == "pos") return TaskShape{TaskKind::classification, Arity::unary};
    if (name == "deprel" || role_formalism_of(name)) return TaskShape{TaskKind::classification, Arity::binary};
    if (spr_property_of(name)) return TaskShape{TaskKind::regression, Arity::binary};
    if (name == "xnli") return TaskShape{TaskKind::classification, Arity::sentence};
    return std::nullopt;
}

// An argument enters the role datasets only if every formalism column present
// in its sentence labels it, so the three role datasets share their examples.
bool role_fully_labeled(const AnnotatedSentence& sent, const RoleArgument& arg) {
    if (!arg.propbank) return false;
    if (!sent.has_extended_roles) return true;
    return arg.verbnet.has_value() && arg.framenet.has_value();
}

}  // namespace

std::string_view formalism_tag(Formalism f) {
    switch (f) {
    case Formalism::propbank: return "pb";
    case Formalism::verbnet: return "vn";
    case Formalism::framenet: return "fn";
    }
    return "?";
}

const std::optional<std::string>& RoleArgument::label(Formalism f) const {
    switch (f) {
    case Formalism::propbank: return propbank;
    case Formalism::verbnet: return verbnet;
    case Formalism::framenet: return framenet;
    }
    return propbank;
}

void AnnotatedSentence::validate() const {
    const std::size_t n = words.size();
    std::size_t roots = 0;
    for (const auto& w : words) {
        if (!w.head) {
            ++roots;
        } else if (*w.head >= n) {
            throw ValidationError("sentence '" + id + "': head index " + std::to_string(*w.head) + " out of range");
        }
    }
    if (n > 0 && roots != 1) {
        throw ValidationError("sentence '" + id + "': expected a single root, found " + std::to_string(roots));
    }
    // Every word must reach the root within n steps.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cur = i;
        std::size_t steps = 0;
        while (words[cur].head) {
            cur = *words[cur].head;
            if (++steps > n) {
                throw ValidationError("sentence '" + id + "': cyclic heads through word " + std::to_string(i + 1));
            }
        }
    }
    for (const auto& pred : predicates) {
        if (pred.word >= n) throw ValidationError("sentence '" + id + "': predicate index out of range");
        for (const auto& arg : pred.arguments) {
            if (arg.word >= n) throw ValidationError("sentence '" + id + "': argument index out of range");
        }
    }
    for (const auto& r : spr) {
        if (r.predicate >= n || r.argument >= n) {
            throw ValidationError("sentence '" + id + "': SPR index out of range");
        }
    }
}

std::vector<AnnotatedSentence>& Corpus::operator[](Split s) {
    switch (s) {
    case Split::train: return train;
    case Split::dev: return dev;
    case Split::test: return test;
    }
    return train;
}

const std::vector<AnnotatedSentence>& Corpus::operator[](Split s) const {
    return const_cast<Corpus&>(*this)[s];
}

std::string_view to_string(EntailmentLabel label) {
    switch (label) {
    case EntailmentLabel::entailment: return "entailment";
    case EntailmentLabel::contradiction: return "contradiction";
    case EntailmentLabel::neutral: return "neutral";
    }
    return "?";
}

const std::array<std::string_view, 11>& spr_properties() {
    static const std::array<std::string_view, 11> props = {
        "instigation", "volition",  "awareness",          "sentient",        "change.of.location", "exists.as.physical",
        "created",     "destroyed", "changes.possession", "change.of.state", "stationary",
    };
    return props;
}

//
// parsing
//

std::vector<AnnotatedSentence> parse_conll(std::istream& in, std::string_view source_name) {
    std::vector<AnnotatedSentence> out;
    std::optional<std::string> next_id;
    PendingSentence pending;
    std::string raw;
    std::size_t lineno = 0;

    auto flush = [&] {
        if (pending.rows.empty()) return;
        pending.id = next_id ? *next_id : default_id(source_name, out.size() + 1);
        next_id.reset();
        out.push_back(build_sentence(pending, source_name));
        pending = {};
    };

    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim_cr(raw);
        if (is_blank(line)) {
            flush();
            continue;
        }
        if (line.front() == '#') {
            constexpr std::string_view key = "# sent_id = ";
            if (line.starts_with(key)) next_id = std::string(line.substr(key.size()));
            continue;
        }
        std::vector<std::string> cells;
        for (auto c : split_tabs(line)) cells.emplace_back(c);
        if (pending.rows.empty()) pending.first_line = lineno;
        pending.rows.emplace_back(lineno, std::move(cells));
    }
    flush();

    std::set<std::string> ids;
    for (const auto& s : out) {
        if (!ids.insert(s.id).second) throw ValidationError(std::string(source_name) + ": duplicate sentence id '" + s.id + "'");
    }
    return out;
}

std::vector<AnnotatedSentence> parse_conll(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_conll(in, path.string());
}

std::vector<SprRecord> parse_spr(std::istream& in, std::string_view source_name) {
    const std::string src(source_name);
    std::vector<SprRecord> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim_cr(raw);
        if (is_blank(line) || line.front() == '#') continue;
        const auto cells = split_tabs(line);
        if (cells.size() != 5) throw ParseError(src, lineno, "expected 5 columns, got " + std::to_string(cells.size()));
        SprRecord r;
        r.sentence_id = std::string(cells[0]);
        const auto pred = parse_number<std::uint32_t>(cells[1]);
        const auto arg = parse_number<std::uint32_t>(cells[2]);
        if (!pred || !arg) throw ParseError(src, lineno, "non-numeric word index");
        r.predicate = *pred;
        r.argument = *arg;
        r.property = std::string(cells[3]);
        std::replace(r.property.begin(), r.property.end(), '_', '.');
        const auto& known = spr_properties();
        if (std::find(known.begin(), known.end(), r.property) == known.end()) {
            throw ParseError(src, lineno, "unknown proto-role property '" + std::string(cells[3]) + "'");
        }
        const auto value = parse_number<double>(cells[4]);
        if (!value || *value < 1.0 || *value > 5.0) {
            throw ParseError(src, lineno, "proto-role value '" + std::string(cells[4]) + "' outside 1..5");
        }
        r.value = *value;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SprRecord> parse_spr(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_spr(in, path.string());
}

void attach_spr(Corpus& corpus, const std::vector<SprRecord>& records) {
    std::unordered_map<std::string, AnnotatedSentence*> by_id;
    for (auto split : {Split::train, Split::dev, Split::test}) {
        for (auto& s : corpus[split]) by_id.emplace(s.id, &s);
    }
    std::set<std::tuple<std::string, std::uint32_t, std::uint32_t, std::string>> seen;
    for (const auto& [id, sent] : by_id) {
        for (const auto& r : sent->spr) seen.emplace(id, r.predicate, r.argument, r.property);
    }
    for (const auto& r : records) {
        auto it = by_id.find(r.sentence_id);
        if (it == by_id.end()) throw ValidationError("SPR record for unknown sentence '" + r.sentence_id + "'");
        AnnotatedSentence& sent = *it->second;
        if (r.predicate >= sent.words.size() || r.argument >= sent.words.size()) {
            throw ValidationError("SPR record for sentence '" + r.sentence_id + "' addresses a missing word");
        }
        if (!seen.emplace(r.sentence_id, r.predicate, r.argument, r.property).second) {
            throw ValidationError("duplicate SPR record for sentence '" + r.sentence_id + "', property " + r.property);
        }
        sent.spr.push_back(r);
    }
}

std::vector<SentencePairRecord> parse_xnli(std::istream& in, std::string_view source_name) {
    const std::string src(source_name);
    std::vector<SentencePairRecord> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim_cr(raw);
        if (is_blank(line)) continue;
        const auto cells = split_tabs(line);
        if (cells.size() != 3) throw ParseError(src, lineno, "expected 3 columns, got " + std::to_string(cells.size()));
        SentencePairRecord r;
        r.pair_id = default_id(source_name, out.size() + 1);
        r.premise = std::string(cells[0]);
        r.hypothesis = std::string(cells[1]);
        if (cells[2] == "entailment") {
            r.label = EntailmentLabel::entailment;
        } else if (cells[2] == "contradiction") {
            r.label = EntailmentLabel::contradiction;
        } else if (cells[2] == "neutral") {
            r.label = EntailmentLabel::neutral;
        } else {
            throw ParseError(src, lineno, "unknown entailment label '" + std::string(cells[2]) + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SentencePairRecord> parse_xnli(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_xnli(in, path.string());
}

//
// extraction
//

bool is_known_task(std::string_view task_name) { return shape_of(task_name).has_value(); }

Dataset extract_task(const Corpus& corpus, std::string_view task_name, const ExtractConfig& config) {
    const auto shape = shape_of(task_name);
    if (!shape || task_name == "xnli") {
        throw ValidationError("unknown task '" + std::string(task_name) + "'" +
                              (task_name == "xnli" ? " for CoNLL extraction (use extract_xnli)" : ""));
    }
    Dataset ds;
    ds.spec.name = std::string(task_name);
    ds.spec.kind = shape->kind;
    ds.spec.arity = shape->arity;
    ds.spec.metric = metric_for(shape->kind);

    const auto role = role_formalism_of(task_name);
    const auto spr_prop = spr_property_of(task_name);
    bool any_spr = false;

    for (auto split : {Split::train, Split::dev, Split::test}) {
        for (const auto& sent : corpus[split]) {
            auto add = [&](std::uint32_t src, std::optional<std::uint32_t> tgt, Label label) {
                ds.examples.push_back(ExampleRecord{sent.id, src, tgt, std::move(label), split});
            };
            const auto n = static_cast<std::uint32_t>(sent.words.size());
            if (task_name == "token.ix") {
                for (std::uint32_t i = 0; i < n && i < config.max_position; ++i) add(i, std::nullopt, double(i + 1));
            } else if (task_name == "ttype") {
                for (std::uint32_t i = 0; i < n; ++i) add(i, std::nullopt, sent.words[i].form);
            } else if (task_name == "lex.unit") {
                for (std::uint32_t i = 0; i < n; ++i) {
                    const auto& w = sent.words[i];
                    if (w.pos.empty()) throw ValidationError("sentence '" + sent.id + "': empty POS tag");
                    add(i, std::nullopt, w.lemma + "." + w.pos.front());
                }
            } else if (task_name == "pos") {
                for (std::uint32_t i = 0; i < n; ++i) add(i, std::nullopt, sent.words[i].pos);
            } else if (task_name == "deprel") {
                for (std::uint32_t i = 0; i < n; ++i) {
                    const auto& w = sent.words[i];
                    if (w.head) add(*w.head, i, w.deprel);
                }
            } else if (role) {
                if (*role != Formalism::propbank && !sent.has_extended_roles && !sent.predicates.empty()) {
                    throw ValidationError("sentence '" + sent.id + "' has no " + std::string(formalism_tag(*role)) +
                                          " role columns");
                }
                for (const auto& pred : sent.predicates) {
                    for (const auto& arg : pred.arguments) {
                        if (role_fully_labeled(sent, arg)) add(pred.word, arg.word, *arg.label(*role));
                    }
                }
            } else if (spr_prop) {
                any_spr = any_spr || !sent.spr.empty();
                for (const auto& r : sent.spr) {
                    if (r.property == *spr_prop) add(r.predicate, r.argument, r.value);
                }
            }
        }
    }
    if (spr_prop && !any_spr) {
        throw ValidationError("task '" + std::string(task_name) + "' requested but the corpus has no SPR records");
    }

    if (ds.spec.kind == TaskKind::classification) {
        const bool vocab_limited = task_name == "ttype" || task_name == "lex.unit";
        ds.dropped = finalize_labels(ds, vocab_limited ? config.max_labels : kUnlimitedLabels).dropped;
    }
    ds.validate();
    return ds;
}

Dataset extract_xnli(const PairSplits& pairs) {
    Dataset ds;
    ds.spec.name = "xnli";
    ds.spec.kind = TaskKind::classification;
    ds.spec.arity = Arity::sentence;
    ds.spec.metric = Metric::accuracy;
    auto add_split = [&](const std::vector<SentencePairRecord>& records, Split split) {
        for (const auto& r : records) {
            ds.examples.push_back(ExampleRecord{r.pair_id, 0, std::nullopt, std::string(to_string(r.label)), split});
        }
    };
    add_split(pairs.train, Split::train);
    add_split(pairs.dev, Split::dev);
    add_split(pairs.test, Split::test);
    ds.dropped = finalize_labels(ds, kUnlimitedLabels).dropped;
    ds.validate();
    return ds;
}

}  // namespace edgeprobe
