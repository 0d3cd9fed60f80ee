#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segkey/evaluate.hpp"

namespace segkey {

// {"model", "condition", "n_keys", "mean_iou", "per_class", "seed",
//  "config_digest", "per_key_mean_iou"}
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text,
                            const std::string& source = "report");

// header model,condition,n_keys,mean_iou followed by one row
std::string report_to_csv(const EvalReport& report);

// Writes DIR/<model>_<condition>.json and .csv; returns the JSON path.
std::filesystem::path write_report(const std::filesystem::path& dir,
                                   const EvalReport& report);
EvalReport read_report(const std::filesystem::path& path);

// model,correct,no_perm,incorrect with one row per non-block model; hook
// models sorted by id, baseline last. Missing cells are empty.
std::string table_one_csv(const std::vector<EvalReport>& reports);

// block_size then correct/plain/incorrect for shf, np and ffx; one row per
// block size present, ascending.
std::string table_two_csv(const std::vector<EvalReport>& reports);

}  // namespace segkey
