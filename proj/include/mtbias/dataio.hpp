#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/panel.hpp"

namespace mtbias {

/// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
/// Throws ParseError on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_field(std::string_view value);

/// Column roles of a long-format panel (one row per id and occasion).
struct PanelSchema {
  std::string id = "id";
  std::string occasion = "occasion";
  std::string time = "time";
  std::vector<std::string> covariates;
  /// Subset of `covariates` to one-hot encode. Levels are sorted; the first
  /// is the reference and gets no column. Encoded names are "column=level".
  std::vector<std::string> categorical;
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  std::optional<std::string> observed = std::string("observed");

  /// JSON object with the keys above; absent keys keep their defaults.
  static PanelSchema from_json(std::string_view text);
};

/// Validated panel: occasions sorted by occasion index, strictly increasing
/// times, binary treatment ({0,1,true,false}), one outcome per id and the
/// same number of occasions for everyone. The observed column may be
/// missing from the file, in which case everyone is observed; an
/// unobserved outcome may be empty or NA.
/// Errors: MissingColumn, DuplicateOccasion, NonMonotoneTimes,
/// NonBinaryTreatment, InvalidValue.
PanelDataset parse_panel_csv(std::string_view text, const PanelSchema& schema);
PanelDataset load_panel_csv(const std::string& path, const PanelSchema& schema);

/// Writes id, occasion, time, covariates, treatment, outcome, observed with
/// shortest round-trip number formatting. Throws IoError.
std::string format_panel_csv(const PanelDataset& data);
void write_panel_csv(const PanelDataset& data, const std::string& path);

/// Schema matching format_panel_csv for the given covariates.
PanelSchema standard_schema(const std::vector<std::string>& covariates);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
/// Whole-string strict parse. Throws InvalidValue naming `what`.
double parse_double(std::string_view s, const std::string& what);

}  // namespace mtbias
