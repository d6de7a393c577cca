#include "spellforge/csv.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

namespace spellforge {

namespace csv {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string join_fields(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += f;
    }
  }
  return out;
}

}  // namespace csv

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  return in;
}

void expect_header(const std::string& path, const std::string& got,
                   const std::string& want) {
  if (got != want)
    throw CsvError("'" + path + "': expected header '" + want + "', got '" + got + "'");
}

double parse_amount(const std::string& path, std::size_t row, const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw CsvError("'" + path + "' row " + std::to_string(row) + ": bad amount '" + s +
                   "'");
  return v;
}

std::string format_amount(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::vector<SpellRecord> read_spells_csv(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  expect_header(path, line, "person_id,payment_code,start_date,end_date,amount");

  std::vector<SpellRecord> spells;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = csv::split_line(line);
    if (f.size() != 5)
      throw CsvError("'" + path + "' row " + std::to_string(row) + ": expected 5 fields");
    SpellRecord s;
    s.person_id = f[0];
    s.payment_code = f[1];
    try {
      s.start = Date::parse(f[2]);
      s.end = Date::parse(f[3]);
    } catch (const std::invalid_argument& e) {
      throw CsvError("'" + path + "' row " + std::to_string(row) + ": " + e.what());
    }
    if (!f[4].empty()) s.amount = parse_amount(path, row, f[4]);
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw CsvError("'" + path + "' row " + std::to_string(row) + ": " + e.what());
    }
    spells.push_back(std::move(s));
  }
  return spells;
}

void write_spells_csv(const std::string& path, const std::vector<SpellRecord>& spells) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  out << "person_id,payment_code,start_date,end_date,amount\n";
  for (const auto& s : spells) {
    out << csv::join_fields({s.person_id, s.payment_code, s.start.to_iso(),
                             s.end.to_iso(),
                             s.amount ? format_amount(*s.amount) : std::string{}})
        << '\n';
  }
}

std::vector<PersonAttributeRow> read_persons_csv(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  expect_header(path, line, "person_id,attribute,value");

  std::vector<PersonAttributeRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = csv::split_line(line);
    if (f.size() != 3)
      throw CsvError("'" + path + "' row " + std::to_string(row) + ": expected 3 fields");
    rows.push_back({f[0], f[1], f[2]});
  }
  return rows;
}

void write_persons_csv(const std::string& path,
                       const std::vector<PersonAttributeRow>& rows) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  out << "person_id,attribute,value\n";
  for (const auto& r : rows)
    out << csv::join_fields({r.person_id, r.attribute, r.value}) << '\n';
}

std::vector<PersonHistory> assemble_histories(
    const std::vector<SpellRecord>& spells,
    const std::vector<PersonAttributeRow>& attributes) {
  std::vector<PersonHistory> persons;
  std::unordered_map<std::string, std::size_t> index;
  auto person = [&](const std::string& id) -> PersonHistory& {
    auto [it, inserted] = index.try_emplace(id, persons.size());
    if (inserted) persons.push_back(PersonHistory{id, {}, {}});
    return persons[it->second];
  };
  for (const auto& s : spells) person(s.person_id).spells.push_back(s);
  for (const auto& a : attributes) person(a.person_id).demographics[a.attribute] = a.value;
  return persons;
}

}  // namespace spellforge
