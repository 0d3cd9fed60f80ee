#include "segkey/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segkey/errors.hpp"

namespace segkey {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["condition"] = std::string(condition_name(report.condition));
  j["n_keys"] = report.n_keys;
  j["mean_iou"] = report.mean_iou;
  auto per_class = nlohmann::ordered_json::array();
  for (const auto& v : report.per_class) {
    per_class.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json());
  }
  j["per_class"] = per_class;
  j["seed"] = report.seed;
  j["config_digest"] = report.config_digest;
  j["per_key_mean_iou"] = report.per_key;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text, const std::string& source) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.model = j.at("model").get<std::string>();
    r.condition = parse_condition(j.at("condition").get<std::string>());
    r.n_keys = j.at("n_keys").get<std::size_t>();
    r.mean_iou = j.at("mean_iou").get<double>();
    for (const auto& v : j.at("per_class")) {
      r.per_class.push_back(v.is_null() ? std::nullopt
                                        : std::optional<double>(v.get<double>()));
    }
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    if (j.contains("per_key_mean_iou")) {
      r.per_key = j.at("per_key_mean_iou").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!(r.mean_iou >= 0.0 && r.mean_iou <= 1.0)) {
    throw ParseError(source + ": mean_iou outside [0, 1]");
  }
  return r;
}

std::string report_to_csv(const EvalReport& report) {
  return "model,condition,n_keys,mean_iou\n" + report.model + "," +
         std::string(condition_name(report.condition)) + "," +
         std::to_string(report.n_keys) + "," + format_double(report.mean_iou) + "\n";
}

std::filesystem::path write_report(const std::filesystem::path& dir,
                                   const EvalReport& report) {
  std::filesystem::create_directories(dir);
  const std::string stem =
      report.model + "_" + std::string(condition_name(report.condition));
  const auto json_path = dir / (stem + ".json");
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw Error("cannot write " + json_path.string());
    out << report_to_json(report);
  }
  std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
  if (!csv) throw Error("cannot write CSV next to " + json_path.string());
  csv << report_to_csv(report);
  return json_path;
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str(), path.string());
}

namespace {

struct BlockModelId {
  std::string kind;
  std::size_t block_size;
};

// Parses ids of the form "<kind>-b<size>".
std::optional<BlockModelId> parse_block_model(const std::string& id) {
  const auto dash = id.find("-b");
  if (dash == std::string::npos) return std::nullopt;
  const std::string kind = id.substr(0, dash);
  if (kind != "shf" && kind != "np" && kind != "ffx") return std::nullopt;
  std::size_t size = 0;
  const char* first = id.data() + dash + 2;
  const char* last = id.data() + id.size();
  const auto [ptr, ec] = std::from_chars(first, last, size);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return BlockModelId{kind, size};
}

std::string cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string table_one_csv(const std::vector<EvalReport>& reports) {
  std::map<std::string, std::map<ConditionKind, double>> rows;
  for (const auto& r : reports) {
    if (parse_block_model(r.model)) continue;
    rows[r.model][r.condition] = r.mean_iou;
  }
  std::vector<std::string> order;
  for (const auto& [model, _] : rows) {
    if (model != "baseline") order.push_back(model);
  }
  if (rows.contains("baseline")) order.push_back("baseline");

  std::string out = "model,correct,no_perm,incorrect\n";
  for (const auto& model : order) {
    const auto& row = rows[model];
    auto get = [&](ConditionKind k) -> std::optional<double> {
      const auto it = row.find(k);
      return it == row.end() ? std::nullopt : std::optional<double>(it->second);
    };
    out += model + "," + cell(get(ConditionKind::kCorrect)) + "," +
           cell(get(ConditionKind::kNoPerm)) + "," +
           cell(get(ConditionKind::kIncorrect)) + "\n";
  }
  return out;
}

std::string table_two_csv(const std::vector<EvalReport>& reports) {
  // block size -> "<kind>_<condition>" -> value
  std::map<std::size_t, std::map<std::string, double>> rows;
  for (const auto& r : reports) {
    const auto id = parse_block_model(r.model);
    if (!id) continue;
    rows[id->block_size][id->kind + "_" + std::string(condition_name(r.condition))] =
        r.mean_iou;
  }
  static const char* kColumns[] = {"shf_correct", "shf_plain", "shf_incorrect",
                                   "np_correct",  "np_plain",  "np_incorrect",
                                   "ffx_correct", "ffx_plain", "ffx_incorrect"};
  std::string out = "block_size";
  for (const char* c : kColumns) out += std::string(",") + c;
  out += "\n";
  for (const auto& [size, cells] : rows) {
    out += std::to_string(size);
    for (const char* c : kColumns) {
      const auto it = cells.find(c);
      out += ",";
      if (it != cells.end()) out += format_double(it->second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace segkey
