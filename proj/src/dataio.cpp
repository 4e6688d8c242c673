#include "mtbias/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mtbias/error.hpp"

namespace mtbias {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // A lone empty field is a blank line.
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field starting before line " + std::to_string(line));
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
    throw Error(ErrorCode::InvalidValue, what + ": '" + std::string(s) + "' is not a finite number");
  return v;
}

namespace {

std::optional<int> parse_binary(std::string_view s) {
  if (s == "0" || s == "false" || s == "FALSE" || s == "False") return 0;
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") return 1;
  return std::nullopt;
}

bool is_missing(std::string_view s) { return s.empty() || s == "NA"; }

struct RawRow {
  long occasion;
  double time;
  std::vector<double> covariates;
  int treatment;
  std::string outcome_text;
  bool observed;
  std::size_t line;
};

}  // namespace

PanelSchema PanelSchema::from_json(std::string_view text) {
  PanelSchema s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "schema must be a JSON object");
    if (j.contains("id")) s.id = j.at("id").get<std::string>();
    if (j.contains("occasion")) s.occasion = j.at("occasion").get<std::string>();
    if (j.contains("time")) s.time = j.at("time").get<std::string>();
    if (j.contains("covariates")) s.covariates = j.at("covariates").get<std::vector<std::string>>();
    if (j.contains("categorical")) s.categorical = j.at("categorical").get<std::vector<std::string>>();
    if (j.contains("treatment")) s.treatment = j.at("treatment").get<std::string>();
    if (j.contains("outcome")) s.outcome = j.at("outcome").get<std::string>();
    if (j.contains("observed")) {
      if (j.at("observed").is_null())
        s.observed.reset();
      else
        s.observed = j.at("observed").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad schema: ") + e.what());
  }
  for (const auto& c : s.categorical)
    if (std::find(s.covariates.begin(), s.covariates.end(), c) == s.covariates.end())
      throw Error(ErrorCode::InvalidConfig, "categorical column '" + c + "' is not listed as a covariate");
  return s;
}

PanelSchema standard_schema(const std::vector<std::string>& covariates) {
  PanelSchema s;
  s.covariates = covariates;
  return s;
}

PanelDataset parse_panel_csv(std::string_view text, const PanelSchema& schema) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::ParseError, "missing header row");
  const auto& header = rows.front();
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
    return it->second;
  };
  const auto c_id = need(schema.id), c_occ = need(schema.occasion), c_time = need(schema.time);
  const auto c_a = need(schema.treatment), c_y = need(schema.outcome);
  std::optional<std::size_t> c_obs;
  if (schema.observed && col.count(*schema.observed)) c_obs = col.at(*schema.observed);
  std::vector<std::size_t> c_cov;
  for (const auto& c : schema.covariates) c_cov.push_back(need(c));

  auto is_categorical = [&](const std::string& c) {
    return std::find(schema.categorical.begin(), schema.categorical.end(), c) != schema.categorical.end();
  };

  // Levels of categorical covariates, collected in a first pass.
  std::vector<std::vector<std::string>> levels(schema.covariates.size());
  for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
    if (!is_categorical(schema.covariates[c])) continue;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r)
      if (c_cov[c] < rows[r].size()) seen.insert(rows[r][c_cov[c]]);
    levels[c].assign(seen.begin(), seen.end());
  }

  PanelDataset data;
  for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
    if (levels[c].empty()) {
      if (!is_categorical(schema.covariates[c])) data.covariate_names.push_back(schema.covariates[c]);
      continue;
    }
    for (std::size_t l = 1; l < levels[c].size(); ++l)
      data.covariate_names.push_back(schema.covariates[c] + "=" + levels[c][l]);
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<RawRow>> by_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    const auto where = " (line " + std::to_string(line) + ")";
    if (row.size() != header.size())
      throw Error(ErrorCode::ParseError, "row has " + std::to_string(row.size()) + " fields, header has " +
                                             std::to_string(header.size()) + where);
    RawRow raw;
    raw.line = line;
    const double occ = parse_double(row[c_occ], "occasion" + where);
    if (occ != std::floor(occ) || occ < 0) throw Error(ErrorCode::InvalidValue, "occasion must be a non-negative integer" + where);
    raw.occasion = static_cast<long>(occ);
    raw.time = parse_double(row[c_time], "time" + where);
    const auto a = parse_binary(row[c_a]);
    if (!a) throw Error(ErrorCode::NonBinaryTreatment, "treatment '" + row[c_a] + "' is not binary" + where);
    raw.treatment = *a;
    raw.observed = true;
    if (c_obs) {
      const auto o = parse_binary(row[*c_obs]);
      if (!o) throw Error(ErrorCode::InvalidValue, "observed '" + row[*c_obs] + "' is not binary" + where);
      raw.observed = *o == 1;
    }
    raw.outcome_text = row[c_y];
    for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
      const auto& v = row[c_cov[c]];
      if (is_categorical(schema.covariates[c])) {
        for (std::size_t l = 1; l < levels[c].size(); ++l) raw.covariates.push_back(v == levels[c][l] ? 1.0 : 0.0);
      } else {
        raw.covariates.push_back(parse_double(v, schema.covariates[c] + where));
      }
    }
    const auto& id = row[c_id];
    if (id.empty()) throw Error(ErrorCode::InvalidValue, "empty id" + where);
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(raw));
  }

  for (const auto& id : order) {
    auto& raws = by_id.at(id);
    std::stable_sort(raws.begin(), raws.end(), [](const RawRow& a, const RawRow& b) { return a.occasion < b.occasion; });
    Individual ind;
    ind.id = id;
    for (std::size_t k = 0; k < raws.size(); ++k) {
      if (k > 0 && raws[k].occasion == raws[k - 1].occasion)
        throw Error(ErrorCode::DuplicateOccasion,
                    "id " + id + " has occasion " + std::to_string(raws[k].occasion) + " twice (line " +
                        std::to_string(raws[k].line) + ")");
      if (k > 0 && !(raws[k].time > raws[k - 1].time))
        throw Error(ErrorCode::NonMonotoneTimes, "id " + id + ": time does not increase at occasion " +
                                                     std::to_string(raws[k].occasion) + " (line " +
                                                     std::to_string(raws[k].line) + ")");
      if (raws[k].outcome_text != raws[0].outcome_text || raws[k].observed != raws[0].observed)
        throw Error(ErrorCode::InvalidValue, "id " + id + ": outcome and observed must be constant within id (line " +
                                                 std::to_string(raws[k].line) + ")");
      ind.occasions.push_back({raws[k].time, std::move(raws[k].covariates), raws[k].treatment});
    }
    ind.observed = raws[0].observed;
    const auto where = " (id " + id + ")";
    if (is_missing(raws[0].outcome_text)) {
      if (ind.observed) throw Error(ErrorCode::InvalidValue, "observed individual has no outcome" + where);
      ind.outcome = std::nan("");
    } else {
      ind.outcome = parse_double(raws[0].outcome_text, "outcome" + where);
    }
    if (!data.individuals.empty() && data.individuals.front().occasions.size() != ind.occasions.size())
      throw Error(ErrorCode::InvalidValue, "id " + id + " has " + std::to_string(ind.occasions.size()) +
                                               " occasions; every individual needs the same number");
    data.individuals.push_back(std::move(ind));
  }
  return data;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

PanelDataset load_panel_csv(const std::string& path, const PanelSchema& schema) {
  return parse_panel_csv(read_file(path), schema);
}

std::string format_panel_csv(const PanelDataset& data) {
  std::string out = "id,occasion,time";
  for (const auto& c : data.covariate_names) out += "," + csv_field(c);
  out += ",treatment,outcome,observed\n";
  for (const auto& ind : data.individuals) {
    const auto id = csv_field(ind.id);
    const auto y = format_double(ind.outcome);
    for (std::size_t k = 0; k < ind.occasions.size(); ++k) {
      const auto& o = ind.occasions[k];
      out += id;
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += format_double(o.time);
      for (double v : o.covariates) {
        out += ',';
        out += format_double(v);
      }
      out += o.treatment ? ",1," : ",0,";
      out += y;
      out += ind.observed ? ",1\n" : ",0\n";
    }
  }
  return out;
}

void write_panel_csv(const PanelDataset& data, const std::string& path) { write_file(path, format_panel_csv(data)); }

}  // namespace mtbias
