#include "m2fn/data/click_log.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "m2fn/common.hpp"

namespace m2fn::data {

const std::vector<CategoricalSpec>& categorical_specs() {
    static const std::vector<CategoricalSpec> specs = {
        {"gender", 1, 2}, {"age", 1, 9},      {"month", 1, 12}, {"weekday", 1, 7},
        {"time", 0, 23},  {"position", 1, 4}, {"cate2", 1, 4},  {"cate3", 1, 9},
    };
    return specs;
}

int AdAttributes::categorical(const std::string& name) const {
    if (name == "gender") return gender;
    if (name == "age") return age;
    if (name == "month") return month;
    if (name == "weekday") return weekday;
    if (name == "time") return time;
    if (name == "position") return position;
    if (name == "cate2") return cate2;
    if (name == "cate3") return cate3;
    throw UsageError("unknown categorical attribute: " + name);
}

void AdAttributes::set_categorical(const std::string& name, int value) {
    if (name == "gender")
        gender = value;
    else if (name == "age")
        age = value;
    else if (name == "month")
        month = value;
    else if (name == "weekday")
        weekday = value;
    else if (name == "time")
        time = value;
    else if (name == "position")
        position = value;
    else if (name == "cate2")
        cate2 = value;
    else if (name == "cate3")
        cate3 = value;
    else
        throw UsageError("unknown categorical attribute: " + name);
}

std::string AdAttributes::key() const {
    std::ostringstream os;
    os << image_id;
    for (const auto& spec : categorical_specs()) os << '\x1f' << categorical(spec.name);
    os << '\x1f' << title << '\x1f' << desc << '\x1f' << ocr;
    return os.str();
}

std::string validate_record(const ClickLogRecord& rec) {
    if (rec.attrs.image_id.empty()) return "empty image_id";
    for (const auto& spec : categorical_specs()) {
        int v = rec.attrs.categorical(spec.name);
        if (v < spec.min_level || v > spec.max_level)
            return spec.name + "=" + std::to_string(v) + " outside value set [" +
                   std::to_string(spec.min_level) + "," + std::to_string(spec.max_level) + "]";
    }
    if (rec.clicked != 0 && rec.clicked != 1) return "clicked not in {0,1}";
    return {};
}

std::string record_to_json(const ClickLogRecord& rec) {
    nlohmann::json j;
    j["image_id"] = rec.attrs.image_id;
    for (const auto& spec : categorical_specs()) j[spec.name] = rec.attrs.categorical(spec.name);
    j["title"] = rec.attrs.title;
    j["desc"] = rec.attrs.desc;
    j["ocr"] = rec.attrs.ocr;
    j["clicked"] = rec.clicked;
    return j.dump();
}

ClickLogRecord record_from_json(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    ClickLogRecord rec;
    rec.attrs.image_id = j.at("image_id").get<std::string>();
    for (const auto& spec : categorical_specs()) rec.attrs.set_categorical(spec.name, j.at(spec.name).get<int>());
    rec.attrs.title = j.value("title", "");
    rec.attrs.desc = j.value("desc", "");
    rec.attrs.ocr = j.value("ocr", "");
    rec.clicked = j.at("clicked").get<int>();
    return rec;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

ClickLogRecord record_from_csv(const std::vector<std::string>& header, const std::string& line) {
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) throw DataError("CSV field count does not match header");
    ClickLogRecord rec;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& name = header[i];
        const std::string& v = fields[i];
        if (name == "image_id")
            rec.attrs.image_id = v;
        else if (name == "title")
            rec.attrs.title = v;
        else if (name == "desc")
            rec.attrs.desc = v;
        else if (name == "ocr")
            rec.attrs.ocr = v;
        else if (name == "clicked")
            rec.clicked = std::stoi(v);
        else
            rec.attrs.set_categorical(name, std::stoi(v));
    }
    return rec;
}

}  // namespace

std::vector<ClickLogRecord> read_click_logs(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open click log: " + path);
    std::vector<ClickLogRecord> records;
    std::string line;
    bool first = true;
    bool jsonl = false;
    std::vector<std::string> header;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            jsonl = line.front() == '{';
            if (!jsonl) {
                header = split_csv_line(line);
                continue;
            }
        }
        try {
            records.push_back(jsonl ? record_from_json(line) : record_from_csv(header, line));
        } catch (const std::exception& e) {
            throw DataError("malformed record at line " + std::to_string(records.size() + (jsonl ? 1 : 2)) +
                            ": " + e.what());
        }
    }
    return records;
}

void write_click_logs_jsonl(const std::vector<ClickLogRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& rec : records) f << record_to_json(rec) << '\n';
}

}  // namespace m2fn::data
