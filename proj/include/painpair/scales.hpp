#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "painpair/common.hpp"

namespace painpair::scales {

enum class DatasetId { Dementia, Control, UNBC };

const char* dataset_name(DatasetId d);
DatasetId dataset_from_name(const std::string& name);

/// FACS action unit intensities. au4..au10 are scored in [0,5]; au43 is the
/// binary eyes-closed indicator.
struct AUVector {
    double au4 = 0, au6 = 0, au7 = 0, au9 = 0, au10 = 0;
    double au43 = 0;
};

/// PSPI = au43 + max(au6, au7) + max(au9, au10) + au4, range [0,16].
/// Throws on out-of-range fields, naming the offending field.
double compute_pspi(const AUVector& aus);

constexpr int kPacslacItems = 11;
using PacslacItems = std::array<double, kPacslacItems>;  // binary facial items P1..P11

/// One annotated video frame.
struct AnnotationRecord {
    DatasetId dataset = DatasetId::Dementia;
    std::string subject_id;
    long frame_index = 0;
    double fps = 15.0;
    std::optional<AUVector> aus;
    std::optional<double> pspi;
    std::optional<PacslacItems> pacslac;     // present iff dataset != UNBC
    std::optional<double> frontal_score;     // [0,1] when present
    std::string image_path;
};

// ---------------------------------------------------------------------------
// Output head table: 39 (dataset, target) pairs. Dementia block, Control
// block, then UNBC block, each in annotation-row order.

constexpr int kNumHeads = 39;

struct HeadEntry {
    int index;
    DatasetId dataset;
    std::string target;  // "pspi", "au43", "au4", "max_au9_au10", "max_au6_au7",
                         // "p1".."p11", "au9", "au10", "au6", "au7"
};

struct HeadTable {
    std::vector<HeadEntry> entries;

    int pspi_head(DatasetId d) const;
    bool is_pspi(int head) const { return entries.at(head).target == "pspi"; }
    int count(DatasetId d) const;
};

HeadTable build_head_table();

/// Value of one head's target for a record; empty when the record does not
/// carry that annotation (e.g. PACSLAC items on UNBC records).
std::optional<double> head_target_value(const AnnotationRecord& rec, const std::string& target);

// ---------------------------------------------------------------------------
// Annotation CSV.
//
// Header (required):
//   dataset_id,subject_id,frame_index,fps,au4,au6,au7,au9,au10,au43,pspi,
//   p1,...,p11,frontal_score,image_path
// Empty cells mean "absent". When both AUs and PSPI are present, the stored
// PSPI must match compute_pspi within 1e-9.

extern const std::array<const char*, 24> kAnnotationColumns;

std::vector<AnnotationRecord> load_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

}  // namespace painpair::scales
