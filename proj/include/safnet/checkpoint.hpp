#pragma once

// Text checkpoint:
//
//   safnet-checkpoint 1
//   class_count <C>
//   seed <n>
//   options mode=<safnet|fixed> gsm_forward=<0|1> gsm_backward=<0|1> csm=<0|1>
//           channel_attention=<0|1> clip_similarity=<0|1> dropout=<r>     (one line)
//   tensors <T>
//   <name> <count> <v_1> ... <v_count>                                    (T lines)
//   end
//
// Tensors appear in Model::visit order; matrices are row-major; values are
// printed with %.17g so they round-trip exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "safnet/fusion.hpp"
#include "safnet/io.hpp"

namespace safnet {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  ModelOptions options;
};

inline std::string checkpoint_to_string(const Model& model, const ModelOptions& opt) {
  std::string out = "safnet-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += "class_count " + std::to_string(model.class_count) + "\n";
  out += "seed " + std::to_string(model.seed) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", opt.dropout);
  out += std::string("options mode=") + to_string(opt.mode) + " gsm_forward=" + (opt.gsm_terms.forward ? "1" : "0") +
         " gsm_backward=" + (opt.gsm_terms.backward ? "1" : "0") + " csm=" + (opt.use_csm ? "1" : "0") +
         " channel_attention=" + (opt.channel_attention ? "1" : "0") +
         " clip_similarity=" + (opt.clip_similarity ? "1" : "0") + " dropout=" + buf + "\n";
  std::size_t tensors = 0;
  model.visit([&](const std::string&, const double*, std::size_t, bool) { ++tensors; });
  out += "tensors " + std::to_string(tensors) + "\n";
  model.visit([&](const std::string& name, const double* d, std::size_t n, bool) {
    out += name + " " + std::to_string(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", d[i]);
      out += buf;
    }
    out += "\n";
  });
  out += "end\n";
  return out;
}

inline void write_checkpoint(const std::string& path, const Model& model, const ModelOptions& opt) {
  auto f = detail::open_out(path);
  f << checkpoint_to_string(model, opt);
  if (!f) throw std::runtime_error("failed to write " + path);
}

inline Checkpoint parse_checkpoint(const std::string& text, const std::string& path = "<checkpoint>") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(path + ": unexpected end of file, expected " + what);
    ++line_no;
    return detail::split_ws(line);
  };
  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(detail::where(path, line_no) + msg); };
  auto integer = [&](std::string_view t) {
    long long v = 0;
    if (!detail::parse_long(t, v)) throw fail("invalid integer '" + std::string(t) + "'");
    return v;
  };
  auto tok = next("header");
  if (tok.size() != 2 || tok[0] != "safnet-checkpoint") throw fail("not a safnet checkpoint");
  if (tok[1] != std::to_string(kCheckpointVersion)) throw fail("unsupported checkpoint version " + std::string(tok[1]));

  tok = next("class_count");
  if (tok.size() != 2 || tok[0] != "class_count") throw fail("expected 'class_count <n>'");
  const long long classes = integer(tok[1]);
  if (classes < 1 || classes > kHeadClasses) throw fail("class_count out of range");
  tok = next("seed");
  if (tok.size() != 2 || tok[0] != "seed") throw fail("expected 'seed <n>'");
  unsigned long long seed = 0;
  try {
    seed = std::stoull(std::string(tok[1]));
  } catch (const std::exception&) {
    throw fail("invalid seed '" + std::string(tok[1]) + "'");
  }

  Checkpoint ck;
  tok = next("options");
  if (tok.empty() || tok[0] != "options") throw fail("expected 'options ...'");
  for (std::size_t i = 1; i < tok.size(); ++i) {
    const std::string item(tok[i]);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw fail("malformed option '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    auto flag = [&]() {
      if (value != "0" && value != "1") throw fail("option " + key + " must be 0 or 1");
      return value == "1";
    };
    if (key == "mode") {
      try {
        ck.options.mode = parse_fusion_mode(value);
      } catch (const ArgumentError& e) {
        throw fail(e.what());
      }
    } else if (key == "gsm_forward") {
      ck.options.gsm_terms.forward = flag();
    } else if (key == "gsm_backward") {
      ck.options.gsm_terms.backward = flag();
    } else if (key == "csm") {
      ck.options.use_csm = flag();
    } else if (key == "channel_attention") {
      ck.options.channel_attention = flag();
    } else if (key == "clip_similarity") {
      ck.options.clip_similarity = flag();
    } else if (key == "dropout") {
      ck.options.dropout = detail::finite_or_throw(value, path, line_no);
    } else {
      throw fail("unknown option '" + key + "'");
    }
  }

  ck.model = Model(static_cast<int>(classes));
  ck.model.seed = seed;
  std::size_t expected = 0;
  ck.model.visit([&](const std::string&, double*, std::size_t, bool) { ++expected; });
  tok = next("tensors");
  if (tok.size() != 2 || tok[0] != "tensors") throw fail("expected 'tensors <n>'");
  if (integer(tok[1]) != static_cast<long long>(expected))
    throw fail("expected " + std::to_string(expected) + " tensors");
  ck.model.visit([&](const std::string& name, double* d, std::size_t n, bool) {
    auto t = next(name.c_str());
    if (t.size() < 2 || t[0] != name) throw fail("expected tensor '" + name + "'");
    if (integer(t[1]) != static_cast<long long>(n) || t.size() != n + 2)
      throw fail("tensor '" + name + "' must have " + std::to_string(n) + " values");
    for (std::size_t i = 0; i < n; ++i) d[i] = detail::finite_or_throw(t[i + 2], path, line_no);
  });
  tok = next("end");
  if (tok.size() != 1 || tok[0] != "end") throw fail("expected 'end'");
  if (ck.model.gsm.a1 < GsmParams::kMinScale || ck.model.gsm.a2 < GsmParams::kMinScale)
    throw ParseError(path + ": GSM scales a1/a2 below the minimum");
  return ck;
}

inline Checkpoint read_checkpoint(const std::string& path) { return parse_checkpoint(detail::slurp(path), path); }

}  // namespace safnet
