#pragma once

#include <istream>
#include <string>
#include <vector>

#include "qpanel/panel.hpp"

namespace qpanel {

/// A panel read from long-format CSV together with the labels that map the
/// dense indices back to the file's tokens.
struct LoadedPanel {
    PanelData panel;
    std::vector<std::string> ids;      // index i -> id token
    std::vector<std::string> periods;  // index t -> t token
    std::vector<std::string> regressors;
};

/// Reads `id,t,y,x1,...,xd`. Rows may come in any order. Id and period tokens
/// are sorted numerically when every token parses as a number, otherwise
/// lexicographically. Throws DataError on duplicate (id,t) pairs, missing
/// cells (the message lists them), or unparsable values.
LoadedPanel read_panel_csv(std::istream& in);
LoadedPanel read_panel_csv_file(const std::string& path);

/// Splits one CSV line on commas; surrounding whitespace is trimmed and a
/// single pair of enclosing double quotes is removed from each field.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace qpanel
