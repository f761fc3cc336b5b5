#include "ccr/descriptors.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "text_reader.hpp"

namespace ccr {

namespace {

bool valid_identifier(const std::string& id) {
    if (id.empty()) {
        return false;
    }
    for (char c : id) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
            return false;
        }
    }
    return true;
}

}  // namespace

std::vector<Point> FeatureSet::superpixel_centers() const {
    std::vector<Point> centers;
    centers.reserve(superpixels.size());
    for (const auto& sp : superpixels) {
        centers.push_back(sp.center);
    }
    return centers;
}

void validate(const FeatureSet& fs) {
    if (!valid_identifier(fs.image_id)) {
        throw Error("feature set has an empty or malformed image_id '" + fs.image_id + "'");
    }
    const std::string where = "feature set '" + fs.image_id + "': ";
    if (!all_finite(fs.global_desc)) {
        throw Error(where + "non-finite global descriptor value");
    }
    if (fs.desc_dim == 0) {
        throw Error(where + "descriptor dimension must be at least 1");
    }
    for (std::size_t i = 0; i < fs.superpixels.size(); ++i) {
        const auto& sp = fs.superpixels[i];
        if (sp.id != i) {
            throw Error(where + "superpixel ids must be contiguous 0..S-1");
        }
        if (!std::isfinite(sp.center.x) || !std::isfinite(sp.center.y)) {
            throw Error(where + "non-finite superpixel center");
        }
    }
    for (std::size_t i = 0; i < fs.features.size(); ++i) {
        const auto& f = fs.features[i];
        const std::string fw = where + "feature " + std::to_string(i) + ": ";
        if (!std::isfinite(f.pos.x) || !std::isfinite(f.pos.y)) {
            throw Error(fw + "non-finite position");
        }
        if (f.pos.x < 0.0 || f.pos.y < 0.0) {
            throw Error(fw + "negative position");
        }
        if (f.superpixel >= fs.superpixels.size()) {
            throw Error(fw + "dangling superpixel " + std::to_string(f.superpixel));
        }
        if (f.desc.size() != fs.desc_dim) {
            throw Error(fw + "descriptor has dimension " + std::to_string(f.desc.size()) +
                        ", expected " + std::to_string(fs.desc_dim));
        }
        if (!all_finite(f.desc)) {
            throw Error(fw + "non-finite descriptor value");
        }
    }
}

FeatureSet parse_feature_set(std::istream& in, const std::string& source) {
    detail::LineReader r(in, source);
    detail::expect_magic(r, "CCRFS", kFeatureSetFormatVersion);

    FeatureSet fs;
    r.expect_record("image_id", 1);
    fs.image_id = std::string(r.tokens()[1]);
    if (!valid_identifier(fs.image_id)) {
        r.fail("malformed image_id");
    }

    r.expect_record("global_dim", 1);
    const auto global_dim = r.count(1);
    r.expect_line("global");
    if (r.tokens().empty() || r.tokens()[0] != "global") {
        r.fail("expected 'global'");
    }
    if (r.tokens().size() != global_dim + 1) {
        r.fail("wrong dimension count: global descriptor has " +
               std::to_string(r.tokens().size() - 1) + " values, expected " +
               std::to_string(global_dim));
    }
    fs.global_desc.reserve(global_dim);
    for (std::size_t i = 0; i < global_dim; ++i) {
        fs.global_desc.push_back(r.finite_number(i + 1));
    }

    r.expect_record("desc_dim", 1);
    fs.desc_dim = r.count(1);
    if (fs.desc_dim == 0) {
        r.fail("desc_dim must be at least 1");
    }

    r.expect_record("num_superpixels", 1);
    const auto num_sp = r.count(1);
    fs.superpixels.reserve(num_sp);
    for (std::size_t i = 0; i < num_sp; ++i) {
        r.expect_record("sp", 3);
        const auto id = r.count(1);
        if (id != i) {
            r.fail("superpixel ids must ascend 0..S-1, got " + std::to_string(id));
        }
        fs.superpixels.push_back(
            {static_cast<SuperpixelId>(id), {r.finite_number(2), r.finite_number(3)}});
    }

    r.expect_record("num_features", 1);
    const auto num_features = r.count(1);
    fs.features.reserve(num_features);
    for (std::size_t i = 0; i < num_features; ++i) {
        r.expect_line("f");
        const auto& t = r.tokens();
        if (t.empty() || t[0] != "f") {
            r.fail("expected 'f'");
        }
        if (t.size() != fs.desc_dim + 4) {
            r.fail("wrong dimension count: feature has " +
                   std::to_string(t.size() < 4 ? 0 : t.size() - 4) +
                   " descriptor values, expected " + std::to_string(fs.desc_dim));
        }
        Feature f;
        f.pos = {r.finite_number(1), r.finite_number(2)};
        if (f.pos.x < 0.0 || f.pos.y < 0.0) {
            r.fail("negative feature position");
        }
        const auto sp = r.count(3);
        if (sp >= num_sp) {
            r.fail("dangling superpixel " + std::to_string(sp) + " (image has " +
                   std::to_string(num_sp) + ")");
        }
        f.superpixel = static_cast<SuperpixelId>(sp);
        f.desc.reserve(fs.desc_dim);
        for (std::size_t d = 0; d < fs.desc_dim; ++d) {
            f.desc.push_back(r.finite_number(4 + d));
        }
        fs.features.push_back(std::move(f));
    }
    if (r.next_nonblank()) {
        r.fail("trailing content after features");
    }
    return fs;
}

void format_feature_set(const FeatureSet& fs, std::ostream& out) {
    validate(fs);
    out << "CCRFS " << kFeatureSetFormatVersion << '\n';
    out << "image_id " << fs.image_id << '\n';
    out << "global_dim " << fs.global_desc.size() << '\n';
    out << "global";
    detail::write_numbers(out, fs.global_desc);
    out << '\n';
    out << "desc_dim " << fs.desc_dim << '\n';
    out << "num_superpixels " << fs.superpixels.size() << '\n';
    for (const auto& sp : fs.superpixels) {
        out << "sp " << sp.id << ' ' << format_double(sp.center.x) << ' '
            << format_double(sp.center.y) << '\n';
    }
    out << "num_features " << fs.features.size() << '\n';
    for (const auto& f : fs.features) {
        out << "f " << format_double(f.pos.x) << ' ' << format_double(f.pos.y) << ' '
            << f.superpixel;
        detail::write_numbers(out, f.desc);
        out << '\n';
    }
}

FeatureSet read_feature_set(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_feature_set(in, path.string());
}

void write_feature_set(const FeatureSet& fs, const std::filesystem::path& path) {
    // Render first so an invalid set never leaves a partial file behind.
    std::ostringstream buf;
    format_feature_set(fs, buf);
    detail::write_file(path, [&](std::ostream& out) { out << buf.str(); });
}

std::vector<GroundTruthBox> parse_ground_truth(std::istream& in, const std::string& source) {
    detail::LineReader r(in, source);
    detail::expect_magic(r, "CCRGT", kGroundTruthFormatVersion);
    std::vector<GroundTruthBox> boxes;
    while (r.next_nonblank()) {
        if (r.tokens()[0] != "gt" || r.tokens().size() != 6) {
            r.fail("expected 'gt <query_id> <x_min> <y_min> <x_max> <y_max>'");
        }
        GroundTruthBox gt;
        gt.query_id = std::string(r.tokens()[1]);
        gt.box = {r.finite_number(2), r.finite_number(3), r.finite_number(4),
                  r.finite_number(5)};
        if (gt.box.x_min > gt.box.x_max || gt.box.y_min > gt.box.y_max) {
            r.fail("inverted ground-truth box");
        }
        boxes.push_back(std::move(gt));
    }
    return boxes;
}

void format_ground_truth(const std::vector<GroundTruthBox>& boxes, std::ostream& out) {
    out << "CCRGT " << kGroundTruthFormatVersion << '\n';
    for (const auto& gt : boxes) {
        if (!valid_identifier(gt.query_id)) {
            throw Error("malformed ground-truth query id '" + gt.query_id + "'");
        }
        out << "gt " << gt.query_id << ' ' << format_double(gt.box.x_min) << ' '
            << format_double(gt.box.y_min) << ' ' << format_double(gt.box.x_max) << ' '
            << format_double(gt.box.y_max) << '\n';
    }
}

std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_ground_truth(in, path.string());
}

void write_ground_truth(const std::vector<GroundTruthBox>& boxes,
                        const std::filesystem::path& path) {
    std::ostringstream buf;
    format_ground_truth(boxes, buf);
    detail::write_file(path, [&](std::ostream& out) { out << buf.str(); });
}

namespace {
constexpr std::string_view kResultsHeader = "query_id,feature_index,x,y,score,best_ref";

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}
}  // namespace

void format_results_csv(const std::vector<ChangeResult>& results, std::ostream& out) {
    out << kResultsHeader << '\n';
    for (const auto& res : results) {
        for (const auto& e : res.entries) {
            out << res.query_id << ',' << e.feature_index << ',' << format_double(e.pos.x)
                << ',' << format_double(e.pos.y) << ',' << format_double(e.score) << ','
                << e.best_ref.value_or("") << '\n';
        }
    }
}

std::vector<ChangeResult> parse_results_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto strip_cr = [&] {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
    };
    if (!std::getline(in, line)) {
        line_no = 1;
        fail("empty file, expected results header");
    }
    ++line_no;
    strip_cr();
    if (line != kResultsHeader) {
        fail("malformed header, expected '" + std::string(kResultsHeader) + "'");
    }
    std::vector<ChangeResult> results;
    std::map<std::string, std::size_t, std::less<>> slot;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr();
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv(line);
        if (cells.size() != 6) {
            fail("expected 6 columns, got " + std::to_string(cells.size()));
        }
        if (cells[0].empty()) {
            fail("empty query_id");
        }
        ChangeEntry e;
        try {
            e.feature_index = parse_uint(cells[1]);
            e.pos = {parse_double(cells[2]), parse_double(cells[3])};
            e.score = parse_double(cells[4]);
        } catch (const Error& err) {
            fail(err.what());
        }
        if (std::isnan(e.score) || e.score < 0.0) {
            fail("score must be non-negative");
        }
        if (!cells[5].empty()) {
            e.best_ref = std::string(cells[5]);
        }
        auto it = slot.find(cells[0]);
        if (it == slot.end()) {
            it = slot.emplace(std::string(cells[0]), results.size()).first;
            results.push_back({std::string(cells[0]), {}});
        }
        results[it->second].entries.push_back(std::move(e));
    }
    return results;
}

std::vector<ChangeResult> read_results_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_results_csv(in, path.string());
}

void write_results_csv(const std::vector<ChangeResult>& results,
                       const std::filesystem::path& path) {
    std::ostringstream buf;
    format_results_csv(results, buf);
    detail::write_file(path, [&](std::ostream& out) { out << buf.str(); });
}

}  // namespace ccr
