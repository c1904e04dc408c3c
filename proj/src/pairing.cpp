#include "painpair/pairing.hpp"

#include <map>

namespace painpair::pair {

using scales::AnnotationRecord;

DeltaTarget make_target_delta(const AnnotationRecord& ref, const AnnotationRecord& tgt,
                              const scales::HeadTable& heads, bool per_head_gating,
                              bool allow_cross_subject) {
    if (!allow_cross_subject && ref.subject_id != tgt.subject_id)
        fail("pairing: reference subject '" + ref.subject_id + "' does not match target '" +
             tgt.subject_id + "'");

    DeltaTarget out;
    bool sample_gate_open = false;
    if (ref.pspi && tgt.pspi) sample_gate_open = (*tgt.pspi - *ref.pspi) >= 0.0;

    for (const auto& head : heads.entries) {
        if (head.dataset != tgt.dataset) continue;
        const auto rv = scales::head_target_value(ref, head.target);
        const auto tv = scales::head_target_value(tgt, head.target);
        if (!rv || !tv) continue;
        const double d = *tv - *rv;
        out.delta[size_t(head.index)] = d;
        const bool open = per_head_gating ? (d >= 0.0) : sample_gate_open;
        out.mask[size_t(head.index)] = open ? 1.0 : 0.0;
    }
    return out;
}

namespace {

std::vector<std::vector<size_t>> group_by_subject(const std::vector<AnnotationRecord>& records,
                                                  std::vector<size_t>& subject_of) {
    std::map<std::string, size_t> ids;
    std::vector<std::vector<size_t>> groups;
    subject_of.resize(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        const auto [it, inserted] = ids.try_emplace(records[i].subject_id, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
        subject_of[i] = it->second;
    }
    return groups;
}

}  // namespace

PairList sample_training_pairs(const std::vector<AnnotationRecord>& records, uint64_t epoch_seed) {
    std::vector<size_t> subject_of;
    const auto groups = group_by_subject(records, subject_of);
    Rng rng = substream(epoch_seed, {0x70616972u});  // "pair"

    PairList out;
    out.pairs.reserve(records.size());
    for (size_t tgt = 0; tgt < records.size(); ++tgt) {
        const auto& pool = groups[subject_of[tgt]];
        if (pool.size() < 2) {
            ++out.skipped;
            continue;
        }
        size_t pick = uniform_index(rng, pool.size() - 1);
        size_t ref = pool[pick];
        if (ref == tgt) ref = pool.back();
        out.pairs.emplace_back(ref, tgt);
    }
    return out;
}

PairList sample_random_person_pairs(const std::vector<AnnotationRecord>& records,
                                    uint64_t epoch_seed) {
    Rng rng = substream(epoch_seed, {0x616e79u});  // "any"
    PairList out;
    out.pairs.reserve(records.size());
    for (size_t tgt = 0; tgt < records.size(); ++tgt) {
        if (records.size() < 2) {
            ++out.skipped;
            continue;
        }
        size_t ref = uniform_index(rng, records.size() - 1);
        if (ref == tgt) ref = records.size() - 1;
        out.pairs.emplace_back(ref, tgt);
    }
    return out;
}

ReferenceSelection select_reference_frames(const std::vector<AnnotationRecord>& records,
                                           const std::string& subject_id, int n, uint64_t seed) {
    if (n < 1) fail("pairing: reference count must be >= 1");
    ReferenceSelection sel;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].subject_id == subject_id && records[i].pspi && *records[i].pspi == 0.0)
            sel.ids.push_back(i);
    Rng rng = substream(seed, {0x726566u, fnv1a64(subject_id.data(), subject_id.size())});
    shuffle(sel.ids, rng);
    if (sel.ids.size() > size_t(n)) {
        sel.ids.resize(size_t(n));
    } else if (sel.ids.size() < size_t(n)) {
        sel.shortfall = true;
    }
    return sel;
}

}  // namespace painpair::pair
