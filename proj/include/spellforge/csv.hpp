#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spellforge/spells.hpp"

namespace spellforge {

// Minimal RFC-4180-ish CSV: fields containing comma/quote/newline are quoted,
// quotes doubled. All files are UTF-8 with a header row.
namespace csv {
std::vector<std::string> split_line(const std::string& line);
std::string join_fields(const std::vector<std::string>& fields);
}  // namespace csv

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// spells.csv: person_id,payment_code,start_date,end_date,amount
std::vector<SpellRecord> read_spells_csv(const std::string& path);
void write_spells_csv(const std::string& path, const std::vector<SpellRecord>& spells);

// persons.csv: person_id,attribute,value (long format)
struct PersonAttributeRow {
  std::string person_id;
  std::string attribute;
  std::string value;
};
std::vector<PersonAttributeRow> read_persons_csv(const std::string& path);
void write_persons_csv(const std::string& path,
                       const std::vector<PersonAttributeRow>& rows);

// Groups spells + attributes into person histories. Row order of first
// appearance (spells first, then attribute-only persons) is preserved.
std::vector<PersonHistory> assemble_histories(
    const std::vector<SpellRecord>& spells,
    const std::vector<PersonAttributeRow>& attributes);

}  // namespace spellforge
