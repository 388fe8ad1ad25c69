#include "spincool/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "spincool/text.hpp"

namespace spincool::config {

namespace {

using core::Species;
using text::ParseError;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

// ---------------------------------------------------------------------------
// Shared line tokenizer.  '#' starts a comment anywhere; `stripped` keeps the
// comment-free, right-trimmed line so note text can be recovered verbatim.

struct Tok {
  std::string text;
  int col = 0;  // 1-based
};

struct CLine {
  int number = 0;  // 1-based
  std::vector<Tok> toks;
  std::string stripped;
};

std::vector<CLine> tokenize(const std::string& body) {
  std::vector<CLine> lines;
  std::istringstream in(body);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    std::size_t cut = raw.find('#');
    std::string stripped = cut == std::string::npos ? raw : raw.substr(0, cut);
    while (!stripped.empty() && std::isspace(static_cast<unsigned char>(stripped.back()))) {
      stripped.pop_back();
    }
    CLine line;
    line.number = number;
    line.stripped = stripped;
    std::size_t i = 0;
    while (i < stripped.size()) {
      if (std::isspace(static_cast<unsigned char>(stripped[i]))) {
        ++i;
        continue;
      }
      std::size_t start = i;
      while (i < stripped.size() && !std::isspace(static_cast<unsigned char>(stripped[i]))) ++i;
      line.toks.push_back(Tok{stripped.substr(start, i - start), static_cast<int>(start) + 1});
    }
    if (!line.toks.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

// The provenance text after the `note` keyword, internal spacing preserved.
std::string note_text(const CLine& line) {
  if (line.toks.size() < 2) {
    throw ParseError("note needs text", line.number, line.toks[0].col);
  }
  return line.stripped.substr(static_cast<std::size_t>(line.toks[1].col) - 1);
}

double num_value(const CLine& line, const Tok& tok) {
  double v = 0.0;
  if (!text::parse_double(tok.text, v)) {
    throw ParseError("expected a number, got '" + tok.text + "'", line.number, tok.col);
  }
  return v;
}

void expect_pair(const CLine& line, const std::string& key) {
  if (line.toks.size() != 2) {
    throw ParseError("expected `" + key + " <value>`", line.number, line.toks[0].col);
  }
}

void reject_duplicate(bool already, const CLine& line, const std::string& key) {
  if (already) {
    throw ParseError("duplicate key '" + key + "'", line.number, line.toks[0].col);
  }
}

void close_brace_only(const CLine& line) {
  if (line.toks.size() != 1) {
    throw ParseError("unexpected token after '}'", line.number, line.toks[1].col);
  }
}

bool token_safe(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '#' || c == '{' || c == '}') {
      return false;
    }
  }
  return true;
}

bool note_safe(const std::string& s) {
  if (s.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(s.front())) ||
      std::isspace(static_cast<unsigned char>(s.back()))) {
    return false;
  }
  return s.find('#') == std::string::npos && s.find('\n') == std::string::npos &&
         s.find('\r') == std::string::npos;
}

// ---------------------------------------------------------------------------
// Molecule parsing.

void parse_spin_block(const std::vector<CLine>& lines, std::size_t& pos, MoleculeSpec& m,
                      std::set<std::string>& labels) {
  const CLine& head = lines[pos];
  if (head.toks.size() != 3 || head.toks[2].text != "{") {
    throw ParseError("expected `spin <label> {`", head.number, head.toks[0].col);
  }
  const std::string label = head.toks[1].text;
  if (!labels.insert(label).second) {
    throw ParseError("duplicate spin label '" + label + "'", head.number, head.toks[1].col);
  }
  core::SpinDef def;
  def.label = label;
  bool have_species = false, have_shift = false, have_t1 = false, have_t2 = false,
       have_gamma = false;
  ++pos;
  while (pos < lines.size()) {
    const CLine& line = lines[pos];
    const std::string& kw = line.toks[0].text;
    if (kw == "}") {
      close_brace_only(line);
      ++pos;
      if (!have_species) {
        throw ParseError("spin '" + label + "' is missing species", head.number, head.toks[0].col);
      }
      if (!have_t1) {
        throw ParseError("spin '" + label + "' is missing t1_s", head.number, head.toks[0].col);
      }
      if (!have_t2) {
        throw ParseError("spin '" + label + "' is missing t2_s", head.number, head.toks[0].col);
      }
      m.spins.push_back(std::move(def));
      return;
    }
    if (kw == "species") {
      expect_pair(line, kw);
      reject_duplicate(have_species, line, kw);
      try {
        def.species = core::species_from_string(line.toks[1].text);
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line.number, line.toks[1].col);
      }
      have_species = true;
    } else if (kw == "shift_hz") {
      expect_pair(line, kw);
      reject_duplicate(have_shift, line, kw);
      def.shift_hz = num_value(line, line.toks[1]);
      have_shift = true;
    } else if (kw == "t1_s") {
      expect_pair(line, kw);
      reject_duplicate(have_t1, line, kw);
      def.t1_s = num_value(line, line.toks[1]);
      if (!(def.t1_s > 0.0)) {
        throw ParseError("t1_s must be positive", line.number, line.toks[1].col);
      }
      have_t1 = true;
    } else if (kw == "t2_s") {
      expect_pair(line, kw);
      reject_duplicate(have_t2, line, kw);
      def.t2_s = num_value(line, line.toks[1]);
      if (!(def.t2_s > 0.0)) {
        throw ParseError("t2_s must be positive", line.number, line.toks[1].col);
      }
      have_t2 = true;
    } else if (kw == "gamma_rel") {
      expect_pair(line, kw);
      reject_duplicate(have_gamma, line, kw);
      def.gamma_rel = num_value(line, line.toks[1]);
      if (!(def.gamma_rel > 0.0)) {
        throw ParseError("gamma_rel must be positive", line.number, line.toks[1].col);
      }
      have_gamma = true;
    } else if (kw == "note") {
      const std::string key = "spin " + label;
      reject_duplicate(m.notes.count(key) != 0, line, "note");
      m.notes[key] = note_text(line);
    } else {
      throw ParseError("unknown spin key '" + kw + "'", line.number, line.toks[0].col);
    }
    ++pos;
  }
  throw ParseError("spin block never closed", lines.back().number, 1);
}

struct PendingJ {
  core::JCoupling j;
  int line = 0;
  int col = 0;
};

void parse_j_entry(const std::vector<CLine>& lines, std::size_t& pos, MoleculeSpec& m,
                   std::vector<PendingJ>& pending) {
  const CLine& head = lines[pos];
  if (head.toks.size() != 4) {
    throw ParseError("expected `j <a> <b> <hz>` or `j <a> <b> {`", head.number,
                     head.toks[0].col);
  }
  PendingJ entry;
  entry.j.a = head.toks[1].text;
  entry.j.b = head.toks[2].text;
  entry.line = head.number;
  entry.col = head.toks[1].col;
  if (head.toks[3].text != "{") {
    entry.j.hz = num_value(head, head.toks[3]);
    pending.push_back(std::move(entry));
    ++pos;
    return;
  }
  ++pos;
  bool have_hz = false;
  const std::string note_key = "j " + entry.j.a + " " + entry.j.b;
  while (pos < lines.size()) {
    const CLine& line = lines[pos];
    const std::string& kw = line.toks[0].text;
    if (kw == "}") {
      close_brace_only(line);
      ++pos;
      if (!have_hz) {
        throw ParseError("coupling block is missing hz", head.number, head.toks[0].col);
      }
      pending.push_back(std::move(entry));
      return;
    }
    if (kw == "hz") {
      expect_pair(line, kw);
      reject_duplicate(have_hz, line, kw);
      entry.j.hz = num_value(line, line.toks[1]);
      have_hz = true;
    } else if (kw == "note") {
      reject_duplicate(m.notes.count(note_key) != 0, line, "note");
      m.notes[note_key] = note_text(line);
    } else {
      throw ParseError("unknown coupling key '" + kw + "'", line.number, line.toks[0].col);
    }
    ++pos;
  }
  throw ParseError("coupling block never closed", lines.back().number, 1);
}

// Serialization shared by the public form and the hash (which drops notes).
std::string serialize_molecule_impl(const MoleculeSpec& m, bool with_notes) {
  if (!token_safe(m.name)) fail("molecule name must be a single word");
  auto note_for = [&](const std::string& key) -> const std::string* {
    if (!with_notes) return nullptr;
    auto it = m.notes.find(key);
    return it == m.notes.end() ? nullptr : &it->second;
  };
  std::string out = "molecule " + m.name + " {\n";
  out += "  temperature_k " + text::format_double(m.temperature_k) + "\n";
  if (const std::string* n = note_for("molecule")) out += "  note " + *n + "\n";
  for (const core::SpinDef& s : m.spins) {
    if (!token_safe(s.label)) fail("spin label must be a single word");
    out += "  spin " + s.label + " {\n";
    out += "    species " + core::to_string(s.species) + "\n";
    out += "    shift_hz " + text::format_double(s.shift_hz) + "\n";
    out += "    t1_s " + text::format_double(s.t1_s) + "\n";
    out += "    t2_s " + text::format_double(s.t2_s) + "\n";
    if (s.gamma_rel != 0.0) out += "    gamma_rel " + text::format_double(s.gamma_rel) + "\n";
    if (const std::string* n = note_for("spin " + s.label)) out += "    note " + *n + "\n";
    out += "  }\n";
  }
  for (const core::JCoupling& j : m.couplings) {
    if (!token_safe(j.a) || !token_safe(j.b)) fail("coupling labels must be single words");
    const std::string* n = note_for("j " + j.a + " " + j.b);
    if (n) {
      out += "  j " + j.a + " " + j.b + " {\n";
      out += "    hz " + text::format_double(j.hz) + "\n";
      out += "    note " + *n + "\n";
      out += "  }\n";
    } else {
      out += "  j " + j.a + " " + j.b + " " + text::format_double(j.hz) + "\n";
    }
  }
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Parameter helpers shared by the plan/sequence resolution.

bool get_param(const std::map<std::string, std::string>& params, const std::string& key,
               double& out) {
  auto it = params.find(key);
  if (it == params.end()) return false;
  if (!text::parse_double(it->second, out)) {
    fail("parameter '" + key + "' must be a number, got '" + it->second + "'");
  }
  return true;
}

double require_param(const std::string& name, const std::map<std::string, std::string>& params,
                     const std::string& key) {
  double v = 0.0;
  if (!get_param(params, key, v)) {
    fail("sequence '" + name + "' requires parameter '" + key + "'");
  }
  return v;
}

void check_keys(const std::string& name, const std::map<std::string, std::string>& params,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : params) {
    if (!allowed.count(key)) {
      fail("sequence '" + name + "' does not take parameter '" + key + "'");
    }
  }
}

// Carbons carrying at least one proton coupling, with their proton counts.
std::map<int, int> protonated_carbons(const core::SpinSystem& system) {
  std::map<int, int> counts;
  for (int i = 0; i < system.size(); ++i) {
    for (int j = i + 1; j < system.size(); ++j) {
      if (system.j_hz(i, j) == 0.0) continue;
      Species si = system.nucleus(i).species;
      Species sj = system.nucleus(j).species;
      if (si == sj) continue;
      int carbon = si == Species::C13 ? i : j;
      ++counts[carbon];
    }
  }
  return counts;
}

}  // namespace

// ---------------------------------------------------------------------------
// Molecule API.

MoleculeSpec parse_molecule(const std::string& body) {
  std::vector<CLine> lines = tokenize(body);
  if (lines.empty()) throw ParseError("empty molecule description", 1, 1);
  const CLine& head = lines[0];
  if (head.toks[0].text != "molecule" || head.toks.size() != 3 || head.toks[2].text != "{") {
    throw ParseError("expected `molecule <name> {`", head.number, head.toks[0].col);
  }
  MoleculeSpec m;
  m.name = head.toks[1].text;
  std::size_t pos = 1;
  bool closed = false;
  bool have_temp = false;
  std::set<std::string> labels;
  std::vector<PendingJ> pending;
  while (pos < lines.size()) {
    const CLine& line = lines[pos];
    const std::string& kw = line.toks[0].text;
    if (kw == "}") {
      close_brace_only(line);
      ++pos;
      closed = true;
      break;
    }
    if (kw == "temperature_k") {
      expect_pair(line, kw);
      reject_duplicate(have_temp, line, kw);
      m.temperature_k = num_value(line, line.toks[1]);
      if (!(m.temperature_k > 0.0)) {
        throw ParseError("temperature_k must be positive", line.number, line.toks[1].col);
      }
      have_temp = true;
      ++pos;
    } else if (kw == "note") {
      reject_duplicate(m.notes.count("molecule") != 0, line, "note");
      m.notes["molecule"] = note_text(line);
      ++pos;
    } else if (kw == "spin") {
      parse_spin_block(lines, pos, m, labels);
    } else if (kw == "j") {
      parse_j_entry(lines, pos, m, pending);
    } else {
      throw ParseError("unknown molecule key '" + kw + "'", line.number, line.toks[0].col);
    }
  }
  if (!closed) {
    throw ParseError("molecule block never closed", lines.back().number, 1);
  }
  if (pos < lines.size()) {
    throw ParseError("unexpected content after the molecule block", lines[pos].number,
                     lines[pos].toks[0].col);
  }
  if (!have_temp) {
    throw ParseError("molecule block is missing temperature_k", head.number, head.toks[0].col);
  }
  if (m.spins.empty()) {
    throw ParseError("molecule defines no spins", head.number, head.toks[0].col);
  }
  std::set<std::pair<std::string, std::string>> seen_pairs;
  for (PendingJ& entry : pending) {
    if (!labels.count(entry.j.a)) {
      throw ParseError("coupling names unknown spin '" + entry.j.a + "'", entry.line, entry.col);
    }
    if (!labels.count(entry.j.b)) {
      throw ParseError("coupling names unknown spin '" + entry.j.b + "'", entry.line, entry.col);
    }
    if (entry.j.a == entry.j.b) {
      throw ParseError("coupling joins a spin to itself", entry.line, entry.col);
    }
    auto key = std::minmax(entry.j.a, entry.j.b);
    if (!seen_pairs.insert(key).second) {
      throw ParseError("duplicate coupling between '" + entry.j.a + "' and '" + entry.j.b + "'",
                       entry.line, entry.col);
    }
    m.couplings.push_back(std::move(entry.j));
  }
  return m;
}

std::string serialize_molecule(const MoleculeSpec& molecule) {
  // Every note must hang off an existing section or it would be dropped and
  // the round-trip would lose it.
  for (const auto& [key, value] : molecule.notes) {
    if (!note_safe(value)) {
      fail("note for '" + key + "' is empty, padded, or contains '#' or a newline");
    }
    bool anchored = key == "molecule";
    for (const core::SpinDef& s : molecule.spins) anchored |= key == "spin " + s.label;
    for (const core::JCoupling& j : molecule.couplings) anchored |= key == "j " + j.a + " " + j.b;
    if (!anchored) fail("note key '" + key + "' matches no spin, coupling, or the molecule");
  }
  return serialize_molecule_impl(molecule, true);
}

core::SpinSystem build_system(const MoleculeSpec& molecule) {
  return core::build_spin_system(molecule.spins, molecule.couplings, molecule.temperature_k);
}

// ---------------------------------------------------------------------------
// Experiment API.

ExperimentSpec parse_experiment(const std::string& body) {
  std::vector<CLine> lines = tokenize(body);
  if (lines.empty()) throw ParseError("empty experiment description", 1, 1);
  const CLine& head = lines[0];
  if (head.toks[0].text != "experiment" || head.toks.size() != 3 || head.toks[2].text != "{") {
    throw ParseError("expected `experiment <name> {`", head.number, head.toks[0].col);
  }
  ExperimentSpec spec;
  spec.name = head.toks[1].text;
  std::size_t pos = 1;
  bool closed = false;
  bool have_molecule = false, have_sequence = false, have_outputs = false;
  bool have_gd = false, have_gamma = false, have_step = false, have_noise = false;
  while (pos < lines.size()) {
    const CLine& line = lines[pos];
    const std::string& kw = line.toks[0].text;
    if (kw == "}") {
      close_brace_only(line);
      ++pos;
      closed = true;
      break;
    }
    if (kw == "molecule") {
      expect_pair(line, kw);
      reject_duplicate(have_molecule, line, kw);
      spec.molecule = line.toks[1].text;
      have_molecule = true;
      ++pos;
    } else if (kw == "sequence") {
      reject_duplicate(have_sequence, line, "sequence");
      have_sequence = true;
      if (line.toks.size() == 2) {
        spec.sequence = line.toks[1].text;
        ++pos;
      } else if (line.toks.size() == 3 && line.toks[2].text == "{") {
        spec.sequence = line.toks[1].text;
        ++pos;
        bool block_closed = false;
        while (pos < lines.size()) {
          const CLine& pline = lines[pos];
          if (pline.toks[0].text == "}") {
            close_brace_only(pline);
            ++pos;
            block_closed = true;
            break;
          }
          if (pline.toks.size() != 2) {
            throw ParseError("expected `<parameter> <value>`", pline.number, pline.toks[0].col);
          }
          const std::string& key = pline.toks[0].text;
          if (spec.params.count(key)) {
            throw ParseError("duplicate parameter '" + key + "'", pline.number,
                             pline.toks[0].col);
          }
          double v = 0.0;
          spec.params[key] = text::parse_double(pline.toks[1].text, v)
                                 ? text::format_double(v)
                                 : pline.toks[1].text;
          ++pos;
        }
        if (!block_closed) {
          throw ParseError("sequence block never closed", lines.back().number, 1);
        }
      } else {
        throw ParseError("expected `sequence <name>` or `sequence <name> {`", line.number,
                         line.toks[0].col);
      }
    } else if (kw == "sequence_file") {
      expect_pair(line, kw);
      reject_duplicate(!spec.sequence_file.empty(), line, kw);
      spec.sequence_file = line.toks[1].text;
      ++pos;
    } else if (kw == "outputs") {
      reject_duplicate(have_outputs, line, kw);
      have_outputs = true;
      if (line.toks.size() < 2) {
        throw ParseError("outputs needs at least one of report, spectra, trajectory",
                         line.number, line.toks[0].col);
      }
      for (std::size_t i = 1; i < line.toks.size(); ++i) {
        const std::string& word = line.toks[i].text;
        if (word != "report" && word != "spectra" && word != "trajectory") {
          throw ParseError("unknown output '" + word + "'", line.number, line.toks[i].col);
        }
        if (!spec.outputs.insert(word).second) {
          throw ParseError("duplicate output '" + word + "'", line.number, line.toks[i].col);
        }
      }
      ++pos;
    } else if (kw == "gd_mm" || kw == "gamma_rel_h1" || kw == "step_s" || kw == "noise_pct") {
      expect_pair(line, kw);
      bool& flag = kw == "gd_mm"          ? have_gd
                   : kw == "gamma_rel_h1" ? have_gamma
                   : kw == "step_s"       ? have_step
                                          : have_noise;
      reject_duplicate(flag, line, kw);
      flag = true;
      double v = num_value(line, line.toks[1]);
      if (v < 0.0) {
        throw ParseError(kw + " must be non-negative", line.number, line.toks[1].col);
      }
      if (kw == "gd_mm") spec.gd_mm = v;
      if (kw == "gamma_rel_h1") spec.gamma_rel_h1 = v;
      if (kw == "step_s") spec.step_s = v;
      if (kw == "noise_pct") spec.noise_pct = v;
      ++pos;
    } else {
      throw ParseError("unknown experiment key '" + kw + "'", line.number, line.toks[0].col);
    }
  }
  if (!closed) {
    throw ParseError("experiment block never closed", lines.back().number, 1);
  }
  if (pos < lines.size()) {
    throw ParseError("unexpected content after the experiment block", lines[pos].number,
                     lines[pos].toks[0].col);
  }
  if (!have_molecule) {
    throw ParseError("experiment is missing a molecule", head.number, head.toks[0].col);
  }
  if (spec.sequence.empty() && spec.sequence_file.empty()) {
    throw ParseError("experiment needs a sequence or a sequence_file", head.number,
                     head.toks[0].col);
  }
  if (!spec.sequence.empty() && !spec.sequence_file.empty()) {
    throw ParseError("experiment has both a builtin sequence and a sequence_file", head.number,
                     head.toks[0].col);
  }
  if (!spec.sequence_file.empty() && !spec.params.empty()) {
    throw ParseError("parameters only apply to builtin sequences", head.number,
                     head.toks[0].col);
  }
  if (!have_outputs) spec.outputs = {"report"};
  return spec;
}

std::string serialize_experiment(const ExperimentSpec& spec) {
  if (!token_safe(spec.name)) fail("experiment name must be a single word");
  if (!token_safe(spec.molecule)) fail("molecule reference must be a single word");
  if (spec.sequence.empty() == spec.sequence_file.empty()) {
    fail("experiment needs exactly one of sequence and sequence_file");
  }
  if (!spec.sequence_file.empty() && !spec.params.empty()) {
    fail("parameters only apply to builtin sequences");
  }
  for (const std::string& word : spec.outputs) {
    if (word != "report" && word != "spectra" && word != "trajectory") {
      fail("unknown output '" + word + "'");
    }
  }
  if (spec.outputs.empty()) fail("experiment writes no outputs");
  std::string out = "experiment " + spec.name + " {\n";
  out += "  molecule " + spec.molecule + "\n";
  if (!spec.sequence.empty()) {
    if (!token_safe(spec.sequence)) fail("sequence name must be a single word");
    if (spec.params.empty()) {
      out += "  sequence " + spec.sequence + "\n";
    } else {
      out += "  sequence " + spec.sequence + " {\n";
      for (const auto& [key, value] : spec.params) {
        if (!token_safe(key) || !token_safe(value)) {
          fail("sequence parameters must be single words");
        }
        // Re-canonicalize so equal specs serialize identically even when the
        // struct was built by hand with a long numeric literal.
        double v = 0.0;
        out += "    " + key + " " +
               (text::parse_double(value, v) ? text::format_double(v) : value) + "\n";
      }
      out += "  }\n";
    }
  } else {
    if (!token_safe(spec.sequence_file)) fail("sequence_file path must be a single word");
    out += "  sequence_file " + spec.sequence_file + "\n";
  }
  out += "  outputs";
  for (const std::string& word : spec.outputs) out += " " + word;
  out += "\n";
  if (spec.gd_mm != 0.0) out += "  gd_mm " + text::format_double(spec.gd_mm) + "\n";
  if (spec.gamma_rel_h1 != 0.0) {
    out += "  gamma_rel_h1 " + text::format_double(spec.gamma_rel_h1) + "\n";
  }
  if (spec.step_s != 0.0) out += "  step_s " + text::format_double(spec.step_s) + "\n";
  if (spec.noise_pct != 0.0) out += "  noise_pct " + text::format_double(spec.noise_pct) + "\n";
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Hashing.

namespace {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::uint64_t spec_hash(const MoleculeSpec& molecule) {
  return fnv1a64(serialize_molecule_impl(molecule, false));
}

std::uint64_t spec_hash(const ExperimentSpec& spec) { return fnv1a64(serialize_experiment(spec)); }

std::string hash_string(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Builtin library.

namespace {

MoleculeSpec make_glycine() {
  MoleculeSpec m;
  m.name = "glycine";
  m.temperature_k = 297.0;
  m.spins = {
      {"H2a", Species::H1, 0.0, 2.72, 2.72 / 3.0, 0.0},
      {"H2b", Species::H1, 0.0, 2.72, 2.72 / 3.0, 0.0},
      {"C1", Species::C13, 300.0, 31.6, 31.6 / 3.0, 0.0},
      {"C2", Species::C13, -300.0, 3.75, 3.75 / 3.0, 0.0},
  };
  m.couplings = {{"H2a", "C2", 139.7}, {"H2b", "C2", 139.7}, {"C1", "C2", 52.72}};
  m.notes["molecule"] =
      "doubly carbon-13 labeled glycine, 297 K; transverse lifetimes are a one-third-of-"
      "longitudinal placeholder and carbon offsets are synthetic (only in-species "
      "differences matter)";
  m.notes["spin H2a"] =
      "alpha proton, equivalent pair; lifetime 2.72 s from inversion recovery at 297 K";
  m.notes["spin H2b"] =
      "alpha proton, equivalent pair; lifetime 2.72 s from inversion recovery at 297 K";
  m.notes["spin C1"] =
      "carboxyl carbon (the storage spin); lifetime 31.6 s from inversion recovery at 297 K";
  m.notes["spin C2"] = "alpha carbon; lifetime 3.75 s from inversion recovery at 297 K";
  m.notes["j H2a C2"] = "one-bond proton-carbon coupling from the alpha multiplet splitting";
  m.notes["j H2b C2"] = "one-bond proton-carbon coupling from the alpha multiplet splitting";
  m.notes["j C1 C2"] = "one-bond carbon-carbon coupling from the carboxyl doublet splitting";
  return m;
}

MoleculeSpec make_glutamate(const std::string& name, double t1_h2, double t1_h3, double t1_h4,
                            double t1_c1, double t1_c2, double temperature_k,
                            const std::string& sample_note) {
  MoleculeSpec m;
  m.name = name;
  m.temperature_k = temperature_k;
  m.spins = {
      {"H2", Species::H1, 0.0, t1_h2, t1_h2 / 3.0, 0.0},
      {"H3", Species::H1, 0.0, t1_h3, t1_h3 / 3.0, 0.0},
      {"H4", Species::H1, 0.0, t1_h4, t1_h4 / 3.0, 0.0},
      {"C1", Species::C13, 300.0, t1_c1, t1_c1 / 3.0, 0.0},
      {"C2", Species::C13, -300.0, t1_c2, t1_c2 / 3.0, 0.0},
  };
  m.couplings = {{"H2", "C2", 146.2}, {"C1", "C2", 53.41}};
  m.notes["molecule"] = sample_note;
  m.notes["spin H2"] = "alpha proton; lifetime by inversion recovery on this sample";
  m.notes["spin H3"] =
      "beta methylene protons folded into one effective spin; lifetime by inversion recovery; "
      "two-bond couplings to the labeled carbons neglected";
  m.notes["spin H4"] =
      "gamma methylene protons folded into one effective spin; lifetime by inversion recovery; "
      "two-bond couplings to the labeled carbons neglected";
  m.notes["spin C1"] =
      "carboxyl carbon (the storage spin); lifetime by inversion recovery on this sample";
  m.notes["spin C2"] = "alpha carbon; lifetime by inversion recovery on this sample";
  m.notes["j H2 C2"] = "one-bond proton-carbon coupling from the alpha multiplet splitting";
  m.notes["j C1 C2"] = "one-bond carbon-carbon coupling from the carboxyl doublet splitting";
  return m;
}

std::vector<MoleculeSpec> make_builtins() {
  std::vector<MoleculeSpec> all;
  all.push_back(make_glycine());
  all.push_back(make_glutamate(
      "glutamate", 1.29, 1.001, 1.281, 13.03, 1.96, 297.0,
      "doubly carbon-13 labeled glutamate, undoped, 297 K; lifetimes 13.03/1.96/1.29/1.001/"
      "1.281 s for C1/C2/H2/H3/H4; transverse lifetimes are a one-third-of-longitudinal "
      "placeholder, carbon offsets synthetic"));
  all.push_back(make_glutamate(
      "glutamate_gd", 1.10, 0.920, 1.160, 10.2, 1.84, 297.0,
      "doubly carbon-13 labeled glutamate with 0.05 mM gadolinium relaxation agent, 297 K; "
      "lifetimes 10.2/1.84/1.10/0.920/1.160 s for C1/C2/H2/H3/H4"));
  all.push_back(make_glutamate(
      "glutamate_gd_310", 1.50, 1.270, 1.606, 14.36, 2.66, 310.15,
      "doubly carbon-13 labeled glutamate with 0.05 mM gadolinium relaxation agent, 310.15 K "
      "(body temperature); lifetimes 14.36/2.66/1.50/1.270/1.606 s for C1/C2/H2/H3/H4"));
  return all;
}

}  // namespace

const std::vector<MoleculeSpec>& builtin_molecules() {
  static const std::vector<MoleculeSpec> catalog = make_builtins();
  return catalog;
}

const MoleculeSpec* find_builtin_molecule(const std::string& name) {
  for (const MoleculeSpec& m : builtin_molecules()) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const std::vector<std::string>& builtin_sequence_names() {
  static const std::vector<std::string> names = {"inept",  "hcc",         "hcc_wait",
                                                 "potent", "potent_plus", "inversion_recovery"};
  return names;
}

// ---------------------------------------------------------------------------
// Plan and sequence resolution.

sequences::DelayPlan resolve_plan(const core::SpinSystem& system,
                                  const std::map<std::string, std::string>& params) {
  double j_ch = 0.0;
  if (!get_param(params, "j_ch_hz", j_ch)) {
    std::set<double> mags;
    for (int i = 0; i < system.size(); ++i) {
      for (int j = i + 1; j < system.size(); ++j) {
        if (system.j_hz(i, j) == 0.0) continue;
        if (system.nucleus(i).species == system.nucleus(j).species) continue;
        mags.insert(std::abs(system.j_hz(i, j)));
      }
    }
    if (mags.empty()) fail("the molecule has no proton-carbon coupling; set j_ch_hz");
    if (mags.size() > 1) {
      fail("the molecule has several distinct proton-carbon couplings; set j_ch_hz explicitly");
    }
    j_ch = *mags.begin();
  }
  double j_cc = 0.0;
  if (!get_param(params, "j_cc_hz", j_cc)) {
    std::set<double> mags;
    for (int i = 0; i < system.size(); ++i) {
      for (int j = i + 1; j < system.size(); ++j) {
        if (system.j_hz(i, j) == 0.0) continue;
        if (system.nucleus(i).species != Species::C13) continue;
        if (system.nucleus(j).species != Species::C13) continue;
        mags.insert(std::abs(system.j_hz(i, j)));
      }
    }
    if (mags.size() > 1) {
      fail("the molecule has several distinct carbon-carbon couplings; set j_cc_hz explicitly");
    }
    // No carbon-carbon coupling: d7 is unused by the single-transfer
    // sequences that can run on such a molecule, so any positive value does.
    j_cc = mags.empty() ? j_ch : *mags.begin();
  }
  int k = 0;
  double k_raw = 0.0;
  if (get_param(params, "k", k_raw)) {
    k = static_cast<int>(k_raw);
    if (static_cast<double>(k) != k_raw) fail("parameter 'k' must be an integer");
  } else {
    std::map<int, int> counts = protonated_carbons(system);
    if (counts.empty()) fail("no carbon carries a proton coupling; set k explicitly");
    if (counts.size() > 1) fail("several carbons carry proton couplings; set k explicitly");
    k = counts.begin()->second;
  }
  double t = 1e-3;
  get_param(params, "t_s", t);
  return sequences::compute_delays(j_ch, j_cc, k, t);
}

sequences::SequenceProgram instantiate_sequence(
    const std::string& name, const core::SpinSystem& system,
    const std::map<std::string, std::string>& params) {
  const std::vector<std::string>& names = builtin_sequence_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string known;
    for (const std::string& n : names) known += (known.empty() ? "" : ", ") + n;
    fail("unknown sequence '" + name + "'; builtins: " + known);
  }
  if (name == "inversion_recovery") {
    fail("inversion_recovery is a recovery sweep, not a pulse program; run it as an experiment");
  }
  std::set<std::string> allowed = {"j_ch_hz", "j_cc_hz", "k", "t_s"};
  if (name == "inept") allowed.insert("target");
  if (name == "hcc_wait") allowed.insert("d3_s");
  if (name == "potent" || name == "potent_plus") {
    allowed.insert("d2_s");
    allowed.insert("d3_s");
  }
  check_keys(name, params, allowed);
  sequences::DelayPlan plan = resolve_plan(system, params);
  if (name == "inept") {
    std::string target;
    auto it = params.find("target");
    if (it != params.end()) {
      target = it->second;
    } else {
      std::map<int, int> counts = protonated_carbons(system);
      if (counts.empty()) fail("no carbon carries a proton coupling; set target explicitly");
      if (counts.size() > 1) fail("several carbons carry proton couplings; set target explicitly");
      target = system.nucleus(counts.begin()->first).label;
    }
    return sequences::refocused_inept(system, sequences::TargetSelector::of_species(Species::H1),
                                      target, plan, /*selective_on_target=*/true,
                                      sequences::RefocusDelay::D5);
  }
  if (name == "hcc") return sequences::hcc_relay(system, plan);
  if (name == "hcc_wait") {
    return sequences::hcc_wait(system, plan, require_param(name, params, "d3_s"));
  }
  return sequences::potent(system, plan, require_param(name, params, "d2_s"),
                           require_param(name, params, "d3_s"), name == "potent_plus");
}

RecoveryDesign resolve_recovery(const core::SpinSystem& system,
                                const std::map<std::string, std::string>& params) {
  check_keys("inversion_recovery", params,
             {"spin", "tau_count", "tau_min_s", "tau_max_s"});
  auto it = params.find("spin");
  if (it == params.end()) fail("sequence 'inversion_recovery' requires parameter 'spin'");
  RecoveryDesign design;
  design.spin = it->second;
  const double t1 = system.t1_s(system.index_of(design.spin));
  double v = 0.0;
  if (get_param(params, "tau_count", v)) {
    if (v != std::floor(v) || v < 3.0) fail("tau_count must be an integer of at least 3");
    design.tau_count = static_cast<int>(v);
  }
  design.tau_min_s = 0.03 * t1;
  design.tau_max_s = 6.0 * t1;
  get_param(params, "tau_min_s", design.tau_min_s);
  get_param(params, "tau_max_s", design.tau_max_s);
  if (!(design.tau_min_s > 0.0) || !(design.tau_max_s > design.tau_min_s)) {
    fail("recovery window must satisfy 0 < tau_min_s < tau_max_s");
  }
  return design;
}

}  // namespace spincool::config
