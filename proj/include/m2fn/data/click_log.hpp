#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace m2fn::data {

// Value sets of the eight categorical ad attributes.
struct CategoricalSpec {
    std::string name;
    int min_level;
    int max_level;
    int levels() const { return max_level - min_level + 1; }
};

// gender, age, month, weekday, time, position, cate2, cate3 (in this order).
const std::vector<CategoricalSpec>& categorical_specs();

// Attribute values of one ad exposure, minus the click outcome.
struct AdAttributes {
    std::string image_id;
    int gender = 1;
    int age = 1;
    int month = 1;
    int weekday = 1;
    int time = 0;
    int position = 1;
    int cate2 = 1;
    int cate3 = 1;
    std::string title;
    std::string desc;
    std::string ocr;

    int categorical(const std::string& name) const;
    void set_categorical(const std::string& name, int value);

    // Grouping key: image_id plus the full attribute tuple.
    std::string key() const;
};

struct ClickLogRecord {
    AdAttributes attrs;
    int clicked = 0;
};

// Returns empty string if valid, else a description of the violation.
std::string validate_record(const ClickLogRecord& rec);

// Line-delimited click logs. CSV requires a header naming the fields;
// JSON-lines is detected by a leading '{'.
std::vector<ClickLogRecord> read_click_logs(const std::string& path);
void write_click_logs_jsonl(const std::vector<ClickLogRecord>& records, const std::string& path);

std::string record_to_json(const ClickLogRecord& rec);
ClickLogRecord record_from_json(const std::string& line);

}  // namespace m2fn::data
