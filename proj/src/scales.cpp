#include "painpair/scales.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace painpair::scales {

const char* dataset_name(DatasetId d) {
    switch (d) {
        case DatasetId::Dementia: return "Dementia";
        case DatasetId::Control: return "Control";
        case DatasetId::UNBC: return "UNBC";
    }
    fail("dataset: bad enum value");
}

DatasetId dataset_from_name(const std::string& name) {
    if (name == "Dementia") return DatasetId::Dementia;
    if (name == "Control") return DatasetId::Control;
    if (name == "UNBC") return DatasetId::UNBC;
    fail("dataset: unknown dataset_id '" + name + "' (expected Dementia, Control, or UNBC)");
}

namespace {

void check_range(double v, double lo, double hi, const char* field) {
    if (!(v >= lo && v <= hi))
        fail(std::string("pspi: field ") + field + " out of range [" + std::to_string(lo) +
             "," + std::to_string(hi) + "]: " + std::to_string(v));
}

}  // namespace

double compute_pspi(const AUVector& a) {
    check_range(a.au4, 0, 5, "au4");
    check_range(a.au6, 0, 5, "au6");
    check_range(a.au7, 0, 5, "au7");
    check_range(a.au9, 0, 5, "au9");
    check_range(a.au10, 0, 5, "au10");
    if (a.au43 != 0.0 && a.au43 != 1.0)
        fail("pspi: field au43 must be 0 or 1, got " + std::to_string(a.au43));
    return a.au43 + std::max(a.au6, a.au7) + std::max(a.au9, a.au10) + a.au4;
}

HeadTable build_head_table() {
    HeadTable t;
    int idx = 0;
    const auto add = [&](DatasetId d, const char* name) {
        t.entries.push_back({idx++, d, name});
    };
    for (DatasetId d : {DatasetId::Dementia, DatasetId::Control}) {
        add(d, "pspi");
        add(d, "au43");
        add(d, "au4");
        add(d, "max_au9_au10");
        add(d, "max_au6_au7");
        for (int i = 1; i <= kPacslacItems; ++i)
            add(d, ("p" + std::to_string(i)).c_str());
    }
    add(DatasetId::UNBC, "pspi");
    add(DatasetId::UNBC, "au43");
    add(DatasetId::UNBC, "au4");
    add(DatasetId::UNBC, "au9");
    add(DatasetId::UNBC, "au10");
    add(DatasetId::UNBC, "au6");
    add(DatasetId::UNBC, "au7");
    return t;
}

int HeadTable::pspi_head(DatasetId d) const {
    for (const auto& e : entries)
        if (e.dataset == d && e.target == "pspi") return e.index;
    fail("heads: no pspi head for dataset");
}

int HeadTable::count(DatasetId d) const {
    int n = 0;
    for (const auto& e : entries) n += (e.dataset == d);
    return n;
}

std::optional<double> head_target_value(const AnnotationRecord& rec, const std::string& target) {
    if (target == "pspi") return rec.pspi;
    if (target[0] == 'p' && target != "pspi") {
        if (!rec.pacslac) return std::nullopt;
        const int i = int(parse_long(target.substr(1), "heads: pacslac item"));
        return (*rec.pacslac)[i - 1];
    }
    if (!rec.aus) return std::nullopt;
    const AUVector& a = *rec.aus;
    if (target == "au43") return a.au43;
    if (target == "au4") return a.au4;
    if (target == "au6") return a.au6;
    if (target == "au7") return a.au7;
    if (target == "au9") return a.au9;
    if (target == "au10") return a.au10;
    if (target == "max_au6_au7") return std::max(a.au6, a.au7);
    if (target == "max_au9_au10") return std::max(a.au9, a.au10);
    fail("heads: unknown target '" + target + "'");
}

const std::array<const char*, 24> kAnnotationColumns = {
    "dataset_id", "subject_id", "frame_index", "fps",
    "au4", "au6", "au7", "au9", "au10", "au43", "pspi",
    "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "p11",
    "frontal_score", "image_path"};

namespace {

std::optional<double> opt_double(const std::string& cell, const std::string& ctx) {
    if (trim(cell).empty()) return std::nullopt;
    return parse_double(cell, ctx);
}

}  // namespace

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    const Csv csv = read_csv(path);
    if (csv.header.size() != kAnnotationColumns.size())
        fail("annotations: '" + path + "' has " + std::to_string(csv.header.size()) +
             " columns, expected " + std::to_string(kAnnotationColumns.size()));
    for (size_t i = 0; i < kAnnotationColumns.size(); ++i)
        if (csv.header[i] != kAnnotationColumns[i])
            fail("annotations: '" + path + "' column " + std::to_string(i + 1) + " is '" +
                 csv.header[i] + "', expected '" + kAnnotationColumns[i] + "'");

    std::vector<AnnotationRecord> records;
    records.reserve(csv.rows.size());
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = "annotations: '" + path + "' row " + std::to_string(r + 2);
        AnnotationRecord rec;
        rec.dataset = dataset_from_name(row[0]);
        rec.subject_id = row[1];
        if (rec.subject_id.empty()) fail(ctx + ": empty subject_id");
        rec.frame_index = parse_long(row[2], ctx + " frame_index");
        rec.fps = parse_double(row[3], ctx + " fps");
        if (rec.fps <= 0) fail(ctx + ": fps must be positive");

        const bool any_au = !trim(row[4]).empty() || !trim(row[5]).empty() ||
                            !trim(row[6]).empty() || !trim(row[7]).empty() ||
                            !trim(row[8]).empty() || !trim(row[9]).empty();
        if (any_au) {
            AUVector a;
            a.au4 = parse_double(row[4], ctx + " au4");
            a.au6 = parse_double(row[5], ctx + " au6");
            a.au7 = parse_double(row[6], ctx + " au7");
            a.au9 = parse_double(row[7], ctx + " au9");
            a.au10 = parse_double(row[8], ctx + " au10");
            a.au43 = parse_double(row[9], ctx + " au43");
            rec.aus = a;
        }
        rec.pspi = opt_double(row[10], ctx + " pspi");
        if (rec.aus && rec.pspi) {
            const double expect = compute_pspi(*rec.aus);
            if (std::fabs(expect - *rec.pspi) > 1e-9)
                fail(ctx + ": pspi " + std::to_string(*rec.pspi) +
                     " inconsistent with AU fields (expected " + std::to_string(expect) + ")");
        } else if (rec.aus && !rec.pspi) {
            rec.pspi = compute_pspi(*rec.aus);
        }

        const bool any_p = [&] {
            for (int i = 0; i < kPacslacItems; ++i)
                if (!trim(row[11 + i]).empty()) return true;
            return false;
        }();
        if (any_p) {
            PacslacItems items{};
            for (int i = 0; i < kPacslacItems; ++i) {
                items[i] = parse_double(row[11 + i], ctx + " p" + std::to_string(i + 1));
                if (items[i] != 0.0 && items[i] != 1.0)
                    fail(ctx + ": p" + std::to_string(i + 1) + " must be 0 or 1");
            }
            rec.pacslac = items;
        }
        if (rec.dataset == DatasetId::UNBC && rec.pacslac)
            fail(ctx + ": PACSLAC items present on a UNBC record");
        if (rec.dataset != DatasetId::UNBC && !rec.pacslac)
            fail(ctx + ": PACSLAC items missing on a " + dataset_name(rec.dataset) + " record");

        rec.frontal_score = opt_double(row[22], ctx + " frontal_score");
        if (rec.frontal_score && (*rec.frontal_score < 0 || *rec.frontal_score > 1))
            fail(ctx + ": frontal_score outside [0,1]");
        rec.image_path = row[23];
        records.push_back(std::move(rec));
    }
    return records;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
    std::ofstream out(path);
    if (!out) fail("annotations: cannot write '" + path + "'");
    for (size_t i = 0; i < kAnnotationColumns.size(); ++i)
        out << (i ? "," : "") << kAnnotationColumns[i];
    out << "\n";
    out.precision(17);
    const auto cell = [&](const std::optional<double>& v) {
        if (v) out << *v;
    };
    for (const auto& r : records) {
        out << dataset_name(r.dataset) << ',' << r.subject_id << ',' << r.frame_index << ','
            << r.fps << ',';
        if (r.aus) {
            out << r.aus->au4 << ',' << r.aus->au6 << ',' << r.aus->au7 << ',' << r.aus->au9
                << ',' << r.aus->au10 << ',' << r.aus->au43 << ',';
        } else {
            out << ",,,,,,";
        }
        cell(r.pspi);
        for (int i = 0; i < kPacslacItems; ++i) {
            out << ',';
            if (r.pacslac) out << (*r.pacslac)[i];
        }
        out << ',';
        cell(r.frontal_score);
        out << ',' << r.image_path << "\n";
    }
}

}  // namespace painpair::scales
