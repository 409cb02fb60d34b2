#include "utiles/scenario.hpp"

#include <cctype>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace utiles::harness {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string_view strip(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_number(const std::string& s) {
  return !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) != 0);
}

bool parse_u64(const std::string& s, std::uint64_t* out) {
  if (!is_number(s)) return false;
  try {
    size_t pos = 0;
    *out = std::stoull(s, &pos, 0);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

// addresses and lengths live in the 32-bit simulated address space
bool parse_u32(const std::string& s, std::uint64_t* out) {
  return parse_u64(s, out) && *out <= 0xffffffffull;
}

struct Parser {
  std::set<std::string> threads, tiles, vars;
  ParseError err;

  bool fail(int line, std::string msg) {
    err = ParseError{line, std::move(msg)};
    return false;
  }

  bool known_name(const std::string& s) const {
    return threads.count(s) || tiles.count(s) || vars.count(s);
  }

  bool declare(int line, std::set<std::string>& ns, const std::string& name) {
    if (name.empty() || is_number(name)) return fail(line, "bad name '" + name + "'");
    if (known_name(name)) return fail(line, "name '" + name + "' already declared");
    ns.insert(name);
    return true;
  }

  bool need_tile(int line, const std::string& s) {
    if (!tiles.count(s)) return fail(line, "unknown tile '" + s + "'");
    return true;
  }

  bool need_thread(int line, const std::string& s) {
    if (!threads.count(s)) return fail(line, "unknown thread '" + s + "'");
    return true;
  }

  bool need_target(int line, const std::string& s) {
    if (is_number(s)) {
      std::uint64_t v;
      if (!parse_u32(s, &v)) return fail(line, "bad address '" + s + "'");
      return true;
    }
    if (!tiles.count(s) && !vars.count(s)) return fail(line, "unknown target '" + s + "'");
    return true;
  }

  bool parse_caps(int line, const std::string& tok, Statement* st) {
    auto colon = tok.find(':');
    if (colon == std::string::npos) return fail(line, "expected <tile>:<caps> got '" + tok + "'");
    std::string tile = tok.substr(0, colon);
    std::string caps = tok.substr(colon + 1);
    if (!need_tile(line, tile)) return false;
    if (caps == "+") {
      st->caps.emplace_back(tile, false);
    } else if (caps == "+-") {
      st->caps.emplace_back(tile, true);
    } else {
      return fail(line, "bad capability spec '" + caps + "' (use + or +-)");
    }
    return true;
  }
};

bool is_operation(Statement::Kind k) {
  switch (k) {
    case Statement::Kind::thread_decl:
    case Statement::Kind::switch_to:
    case Statement::Kind::expect_fault:
    case Statement::Kind::expect_deny:
      return false;
    default:
      return true;
  }
}

}  // namespace

ParseResult parse_scenario(std::string_view text, std::string name) {
  Scenario sc;
  sc.name = std::move(name);
  Parser p;
  bool have_thread = false;
  bool pending_expect = false;
  int expect_line = 0;

  int lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                         : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;

    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = strip(raw);
    if (raw.empty()) continue;

    auto tok = tokenize(raw);
    Statement st;
    st.line = lineno;
    st.text = std::string(raw);
    const std::string& kw = tok[0];
    auto fail = [&](std::string msg) {
      p.err = ParseError{lineno, std::move(msg)};
      return ParseResult{std::nullopt, p.err};
    };
    auto arity = [&](size_t n) { return tok.size() == n; };

    if (kw == "thread") {
      if (!arity(2)) return fail("usage: thread <name>");
      if (!p.declare(lineno, p.threads, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::thread_decl;
      st.name = tok[1];
      have_thread = true;
    } else if (kw == "switch") {
      if (!arity(2)) return fail("usage: switch <thread>");
      if (!p.need_thread(lineno, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::switch_to;
      st.name = tok[1];
    } else if (kw == "tile") {
      if (!arity(4) || tok[2] != "=" || tok[3] != "create") {
        return fail("usage: tile <name> = create");
      }
      if (!p.declare(lineno, p.tiles, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::tile_create;
      st.name = tok[1];
    } else if (kw == "mmap" || kw == "munmap") {
      bool map = kw == "mmap";
      if (!arity(map ? 5u : 4u)) {
        return fail(map ? "usage: mmap <tile> <addr> <len> <perm>"
                        : "usage: munmap <tile> <addr> <len>");
      }
      if (!p.need_tile(lineno, tok[1])) return {std::nullopt, p.err};
      if (!parse_u32(tok[2], &st.addr)) return fail("bad address '" + tok[2] + "'");
      if (!parse_u32(tok[3], &st.len)) return fail("bad length '" + tok[3] + "'");
      if (map) {
        auto perm = perms_from_string(tok[4]);
        if (!perm) return fail("bad perm '" + tok[4] + "'");
        st.perms = *perm;
      }
      st.kind = map ? Statement::Kind::mmap_op : Statement::Kind::munmap_op;
      st.name = tok[1];
    } else if (kw == "mprotect") {
      if (!arity(3)) return fail("usage: mprotect <tile> <perm>");
      if (!p.need_tile(lineno, tok[1])) return {std::nullopt, p.err};
      auto perm = perms_from_string(tok[2]);
      if (!perm) return fail("bad perm '" + tok[2] + "'");
      st.kind = Statement::Kind::mprotect_op;
      st.name = tok[1];
      st.perms = *perm;
    } else if (kw == "malloc") {
      if (!arity(5) || tok[2] != "=") return fail("usage: malloc <var> = <tile> <size>");
      if (!p.need_tile(lineno, tok[3])) return {std::nullopt, p.err};
      if (!parse_u32(tok[4], &st.size)) return fail("bad size '" + tok[4] + "'");
      if (!p.declare(lineno, p.vars, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::malloc_op;
      st.name = tok[1];
      st.target = tok[3];
    } else if (kw == "free") {
      if (!arity(3)) return fail("usage: free <tile> <var>");
      if (!p.need_tile(lineno, tok[1])) return {std::nullopt, p.err};
      if (!p.vars.count(tok[2])) return fail("unknown var '" + tok[2] + "'");
      st.kind = Statement::Kind::free_op;
      st.name = tok[1];
      st.target = tok[2];
    } else if (kw == "read" || kw == "write" || kw == "exec") {
      size_t want = kw == "write" ? 4 : (kw == "read" ? 3 : 3);
      if (kw == "read" && tok.size() == 4) want = 4;  // optional expected byte
      if (!arity(want)) {
        return fail("usage: " + kw + " <tile|var|addr> <offset>" +
                    (kw == "write" ? " <byte>" : kw == "read" ? " [byte]" : ""));
      }
      if (!p.need_target(lineno, tok[1])) return {std::nullopt, p.err};
      if (!parse_u32(tok[2], &st.offset)) return fail("bad offset '" + tok[2] + "'");
      if (tok.size() == 4) {
        std::uint64_t v;
        if (!parse_u64(tok[3], &v) || v > 0xff) return fail("bad byte '" + tok[3] + "'");
        st.byte = static_cast<std::uint8_t>(v);
      }
      st.kind = kw == "read" ? Statement::Kind::read_op
                             : (kw == "write" ? Statement::Kind::write_op
                                              : Statement::Kind::exec_op);
      st.target = tok[1];
    } else if (kw == "lock" || kw == "unlock" || kw == "declassify") {
      if (tok.size() < 2) return fail("usage: " + kw + " <tile>...");
      for (size_t i = 1; i < tok.size(); ++i) {
        if (!p.need_tile(lineno, tok[i])) return {std::nullopt, p.err};
        st.tiles.push_back(tok[i]);
      }
      st.kind = kw == "lock" ? Statement::Kind::lock_op
                             : (kw == "unlock" ? Statement::Kind::unlock_op
                                               : Statement::Kind::declassify_op);
    } else if (kw == "clone") {
      if (tok.size() < 2) return fail("usage: clone <child> [pass <tile>:<caps>...]");
      if (tok.size() > 2 && tok[2] != "pass") return fail("expected 'pass' after child name");
      for (size_t i = 3; i < tok.size(); ++i) {
        if (!p.parse_caps(lineno, tok[i], &st)) return {std::nullopt, p.err};
      }
      if (tok.size() == 3) return fail("expected capability list after 'pass'");
      if (!p.declare(lineno, p.threads, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::clone_op;
      st.name = tok[1];
    } else if (kw == "transfer") {
      if (tok.size() < 3) return fail("usage: transfer <to> <tile>:<caps>...");
      if (!p.need_thread(lineno, tok[1])) return {std::nullopt, p.err};
      for (size_t i = 2; i < tok.size(); ++i) {
        if (!p.parse_caps(lineno, tok[i], &st)) return {std::nullopt, p.err};
      }
      st.kind = Statement::Kind::transfer_op;
      st.name = tok[1];
    } else if (kw == "grant" || kw == "revoke") {
      if (!arity(3)) return fail("usage: " + kw + " <to> <tile>");
      if (!p.need_thread(lineno, tok[1])) return {std::nullopt, p.err};
      if (!p.need_tile(lineno, tok[2])) return {std::nullopt, p.err};
      st.kind = kw == "grant" ? Statement::Kind::grant_op : Statement::Kind::revoke_op;
      st.name = tok[1];
      st.tiles.push_back(tok[2]);
    } else if (kw == "join") {
      if (!arity(2)) return fail("usage: join <child>");
      if (!p.need_thread(lineno, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::join_op;
      st.name = tok[1];
    } else if (kw == "fork") {
      if (!arity(2)) return fail("usage: fork <child>");
      if (!p.declare(lineno, p.threads, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::fork_op;
      st.name = tok[1];
    } else if (kw == "kill") {
      if (!arity(2)) return fail("usage: kill <tile>");
      if (!p.need_tile(lineno, tok[1])) return {std::nullopt, p.err};
      st.kind = Statement::Kind::kill_op;
      st.name = tok[1];
    } else if (kw == "exit") {
      if (!arity(1)) return fail("usage: exit");
      st.kind = Statement::Kind::exit_op;
    } else if (kw == "posix-mmap" || kw == "posix-mprotect") {
      if (!arity(4)) return fail("usage: " + kw + " <addr> <len> <perm>");
      if (!parse_u32(tok[1], &st.addr)) return fail("bad address '" + tok[1] + "'");
      if (!parse_u32(tok[2], &st.len)) return fail("bad length '" + tok[2] + "'");
      auto perm = perms_from_string(tok[3]);
      if (!perm) return fail("bad perm '" + tok[3] + "'");
      st.perms = *perm;
      st.kind = kw == "posix-mmap" ? Statement::Kind::posix_mmap_op
                                   : Statement::Kind::posix_mprotect_op;
    } else if (kw == "expect-fault") {
      if (!arity(2)) return fail("usage: expect-fault <kind>");
      auto fk = fault_kind_from_string(tok[1]);
      if (!fk) return fail("bad fault kind '" + tok[1] + "'");
      st.kind = Statement::Kind::expect_fault;
      st.expected_fault = *fk;
    } else if (kw == "expect-deny") {
      if (!arity(2)) return fail("usage: expect-deny <reason>");
      auto d = deny_from_string(tok[1]);
      if (!d || *d == Deny::none) return fail("bad deny reason '" + tok[1] + "'");
      st.kind = Statement::Kind::expect_deny;
      st.expected_deny = *d;
    } else {
      return fail("unknown statement '" + kw + "'");
    }

    if (!have_thread) {
      return fail("statement before any thread declaration");
    }
    if (pending_expect) {
      if (!is_operation(st.kind)) {
        return {std::nullopt,
                ParseError{expect_line, "expect-* must be followed by an operation"}};
      }
      pending_expect = false;
    }
    if (st.kind == Statement::Kind::expect_fault || st.kind == Statement::Kind::expect_deny) {
      pending_expect = true;
      expect_line = lineno;
    }
    sc.statements.push_back(std::move(st));
  }

  if (pending_expect) {
    return {std::nullopt, ParseError{expect_line, "expect-* at end of scenario"}};
  }
  if (sc.statements.empty()) {
    return {std::nullopt, ParseError{1, "empty scenario"}};
  }
  return {std::move(sc), ParseError{}};
}

std::string csv_row(std::string_view phase, const mmu::CostCounters& c, const cache::Stats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.*s,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu",
                static_cast<int>(phase.size()), phase.data(),
                static_cast<unsigned long long>(c.dacr_writes),
                static_cast<unsigned long long>(c.tlb_flushes),
                static_cast<unsigned long long>(c.table_walks),
                static_cast<unsigned long long>(c.domain_faults),
                static_cast<unsigned long long>(c.perm_faults),
                static_cast<unsigned long long>(s.hits),
                static_cast<unsigned long long>(s.misses),
                static_cast<unsigned long long>(s.evictions));
  return buf;
}

namespace {

struct Outcome {
  enum class K : std::uint8_t { ok, denied, faulted } k = K::ok;
  Deny reason = Deny::none;
  FaultKind fault = FaultKind::domain;
  std::optional<std::uint8_t> data;

  static Outcome ok() { return {}; }
  static Outcome deny(Deny r) { return Outcome{K::denied, r, FaultKind::domain, std::nullopt}; }
};

std::string describe(const Outcome& o) {
  switch (o.k) {
    case Outcome::K::ok:
      if (o.data) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "ok data=%u", *o.data);
        return buf;
      }
      return "ok";
    case Outcome::K::denied:
      return std::string("deny ") + to_string(o.reason);
    case Outcome::K::faulted:
      return std::string("fault ") + to_string(o.fault);
  }
  return "?";
}

Outcome from_verdict(Verdict v) {
  return v.ok() ? Outcome::ok() : Outcome::deny(v.reason);
}

template <typename T>
Outcome from_result(const Result<T>& r) {
  return r.ok() ? Outcome::ok() : Outcome::deny(r.reason);
}

Outcome from_access(const AccessResult& r) {
  switch (r.status) {
    case AccessResult::Status::ok: {
      Outcome o;
      o.data = r.data;
      return o;
    }
    case AccessResult::Status::rejected:
      return Outcome::deny(r.reason);
    case AccessResult::Status::fault: {
      Outcome o;
      o.k = Outcome::K::faulted;
      o.fault = r.fault_kind;
      return o;
    }
  }
  return Outcome::ok();
}

class Runner {
 public:
  Runner(const Scenario& sc, const RunOptions& opt)
      : sc_(sc), opt_(opt), engine_(opt.engine) {}

  RunReport run() {
    if (opt_.interleave_seed) {
      run_interleaved(*opt_.interleave_seed);
    } else {
      run_script_order();
    }
    return finish();
  }

 private:
  const Scenario& sc_;
  const RunOptions& opt_;
  Engine engine_;
  std::map<std::string, TaskId> threads_;
  std::map<std::string, TileId> tiles_;
  std::map<std::string, std::uint32_t> vars_;
  std::vector<std::string> events_;
  std::vector<std::string> trace_;
  int met_ = 0, total_ = 0, unexpected_ = 0;

  bool resolvable(const Statement& st) const {
    auto tile_ok = [&](const std::string& n) { return tiles_.count(n) != 0; };
    switch (st.kind) {
      case Statement::Kind::mmap_op:
      case Statement::Kind::munmap_op:
      case Statement::Kind::mprotect_op:
      case Statement::Kind::kill_op:
        return tile_ok(st.name);
      case Statement::Kind::malloc_op:
        return tile_ok(st.target);
      case Statement::Kind::free_op:
        return tile_ok(st.name) && vars_.count(st.target);
      case Statement::Kind::read_op:
      case Statement::Kind::write_op:
      case Statement::Kind::exec_op:
        return is_number(st.target) || tiles_.count(st.target) || vars_.count(st.target);
      case Statement::Kind::lock_op:
      case Statement::Kind::unlock_op:
      case Statement::Kind::declassify_op: {
        for (const auto& t : st.tiles) {
          if (!tile_ok(t)) return false;
        }
        return true;
      }
      case Statement::Kind::clone_op:
      case Statement::Kind::transfer_op: {
        for (const auto& [t, m] : st.caps) {
          if (!tile_ok(t)) return false;
        }
        if (st.kind == Statement::Kind::transfer_op && !threads_.count(st.name)) return false;
        return true;
      }
      case Statement::Kind::grant_op:
      case Statement::Kind::revoke_op:
        return threads_.count(st.name) && tile_ok(st.tiles[0]);
      case Statement::Kind::join_op: {
        auto it = threads_.find(st.name);
        if (it == threads_.end()) return false;
        // join blocks while the child is still runnable
        return engine_.task_state(it->second) != TaskRunState::runnable;
      }
      default:
        return true;
    }
  }

  std::optional<std::uint32_t> resolve_target(const std::string& tok, Deny* why) {
    if (is_number(tok)) {
      std::uint64_t v = 0;
      parse_u64(tok, &v);
      return static_cast<std::uint32_t>(v);
    }
    if (auto it = vars_.find(tok); it != vars_.end()) return it->second;
    if (auto it = tiles_.find(tok); it != tiles_.end()) {
      auto base = engine_.tile_cover_base(it->second);
      if (!base.ok()) {
        *why = base.reason;
        return std::nullopt;
      }
      return *base;
    }
    *why = Deny::unknown_id;
    return std::nullopt;
  }

  // A name may be unbound at run time when the statement that would have
  // bound it was denied earlier; surface that as a verdict, not a crash.
  std::optional<TileId> tile_of(const std::string& n) const {
    auto it = tiles_.find(n);
    if (it == tiles_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<TaskId> thread_of(const std::string& n) const {
    auto it = threads_.find(n);
    if (it == threads_.end()) return std::nullopt;
    return it->second;
  }

  Outcome execute(const Statement& st, TaskId actor) {
    using K = Statement::Kind;
    switch (st.kind) {
      case K::tile_create: {
        auto r = engine_.utile_create(actor);
        if (r.ok()) tiles_[st.name] = *r;
        return from_result(r);
      }
      case K::mmap_op: {
        auto tile = tile_of(st.name);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        auto r = engine_.utile_mmap(actor, *tile, static_cast<std::uint32_t>(st.addr),
                                    static_cast<std::uint32_t>(st.len), st.perms);
        return from_result(r);
      }
      case K::munmap_op: {
        auto tile = tile_of(st.name);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        return from_verdict(engine_.utile_munmap(actor, *tile,
                                                 static_cast<std::uint32_t>(st.addr),
                                                 static_cast<std::uint32_t>(st.len)));
      }
      case K::mprotect_op: {
        auto tile = tile_of(st.name);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        return from_verdict(engine_.utile_mprotect(actor, *tile, st.perms));
      }
      case K::malloc_op: {
        auto tile = tile_of(st.target);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        auto r = engine_.utile_malloc(actor, *tile, static_cast<std::uint32_t>(st.size));
        if (r.ok()) vars_[st.name] = *r;
        return from_result(r);
      }
      case K::free_op: {
        auto tile = tile_of(st.name);
        auto var = vars_.find(st.target);
        if (!tile || var == vars_.end()) return Outcome::deny(Deny::unknown_id);
        return from_verdict(engine_.utile_free(actor, *tile, var->second));
      }
      case K::read_op:
      case K::write_op:
      case K::exec_op: {
        Deny why = Deny::none;
        auto base = resolve_target(st.target, &why);
        if (!base) return Outcome::deny(why);
        std::uint32_t vaddr = *base + static_cast<std::uint32_t>(st.offset);
        if (st.kind == K::write_op) {
          return from_access(engine_.mediated_write(actor, vaddr, *st.byte));
        }
        if (st.kind == K::exec_op) return from_access(engine_.mediated_exec(actor, vaddr));
        return from_access(engine_.mediated_read(actor, vaddr));
      }
      case K::lock_op:
      case K::unlock_op:
      case K::declassify_op: {
        std::vector<TileId> ids;
        for (const auto& t : st.tiles) {
          auto tile = tile_of(t);
          if (!tile) return Outcome::deny(Deny::unknown_id);
          ids.push_back(*tile);
        }
        if (st.kind == K::lock_op) return from_verdict(engine_.utile_lock(actor, ids));
        if (st.kind == K::unlock_op) return from_verdict(engine_.utile_unlock(actor, ids));
        return from_verdict(engine_.utile_declassify(actor, ids));
      }
      case K::clone_op:
      case K::transfer_op: {
        UInfo u;
        for (const auto& [tile, minus] : st.caps) {
          auto id = tile_of(tile);
          if (!id) return Outcome::deny(Deny::unknown_id);
          u.push_back(UInfoEntry{*id, true, minus});
        }
        if (st.kind == K::clone_op) {
          auto r = engine_.utile_clone(actor, u);
          if (r.ok()) threads_[st.name] = *r;
          return from_result(r);
        }
        auto to = thread_of(st.name);
        if (!to) return Outcome::deny(Deny::unknown_task);
        return from_verdict(engine_.utile_transfer_caps(actor, u, *to));
      }
      case K::grant_op:
      case K::revoke_op: {
        auto tile = tile_of(st.tiles[0]);
        auto to = thread_of(st.name);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        if (!to) return Outcome::deny(Deny::unknown_task);
        if (st.kind == K::grant_op) {
          return from_verdict(engine_.utile_grant(actor, {*tile}, *to));
        }
        return from_verdict(engine_.utile_revoke_grant(actor, {*tile}, *to));
      }
      case K::join_op: {
        auto child = thread_of(st.name);
        if (!child) return Outcome::deny(Deny::unknown_task);
        auto r = engine_.utile_join(actor, *child);
        return from_result(r);
      }
      case K::fork_op: {
        auto r = engine_.posix_fork(actor);
        if (r.ok()) threads_[st.name] = *r;
        return from_result(r);
      }
      case K::kill_op: {
        auto tile = tile_of(st.name);
        if (!tile) return Outcome::deny(Deny::unknown_id);
        return from_verdict(engine_.utile_kill(actor, *tile));
      }
      case K::exit_op:
        return from_verdict(engine_.task_exit(actor));
      case K::posix_mmap_op:
        return from_verdict(engine_.posix_mmap(actor, static_cast<std::uint32_t>(st.addr),
                                               static_cast<std::uint32_t>(st.len)));
      case K::posix_mprotect_op:
        return from_verdict(engine_.posix_mprotect(actor, static_cast<std::uint32_t>(st.addr),
                                                   static_cast<std::uint32_t>(st.len)));
      default:
        return Outcome::ok();
    }
  }

  void note_line(int line, const std::string& text, const std::string& msg, bool failed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "L%d", line);
    events_.push_back(std::string(failed ? "FAIL " : "ok   ") + buf + " " + text +
                      (msg.empty() ? "" : ": " + msg));
    if (failed) ++unexpected_;
  }

  // Runs one operation, applying the pending expectation if present.
  void run_op(const Statement& st, const Statement* expect, TaskId actor) {
    Outcome o = execute(st, actor);
    trace_.push_back("L" + std::to_string(st.line) + " " + st.text + ": " + describe(o));

    if (expect) {
      ++total_;
      bool matched = false;
      if (expect->kind == Statement::Kind::expect_fault) {
        matched = o.k == Outcome::K::faulted && o.fault == expect->expected_fault;
        if (matched) engine_.acknowledge_fault(actor);  // anticipated: absorb termination
      } else {
        matched = o.k == Outcome::K::denied && o.reason == expect->expected_deny;
      }
      if (matched) {
        ++met_;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "L%d", expect->line);
        events_.push_back(std::string("ok   ") + buf + " " + expect->text);
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "L%d", expect->line);
        events_.push_back(std::string("FAIL ") + buf + " " + expect->text + ": got " +
                          describe(o));
      }
      return;
    }

    // Unguarded operations must succeed.
    if (o.k != Outcome::K::ok) {
      note_line(st.line, st.text, describe(o), true);
      return;
    }
    if (st.kind == Statement::Kind::read_op && st.byte && o.data && *o.data != *st.byte) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "got %u want %u", *o.data, *st.byte);
      note_line(st.line, st.text, buf, true);
    }
  }

  void run_script_order() {
    std::string current;
    const Statement* pending = nullptr;
    for (const Statement& st : sc_.statements) {
      switch (st.kind) {
        case Statement::Kind::thread_decl:
          threads_[st.name] = engine_.spawn_root_task();
          if (current.empty()) current = st.name;
          break;
        case Statement::Kind::switch_to:
          if (!threads_.count(st.name)) {
            // the statement that would have created this thread was denied
            note_line(st.line, st.text, "thread never came to exist", true);
            break;
          }
          current = st.name;
          break;
        case Statement::Kind::expect_fault:
        case Statement::Kind::expect_deny:
          pending = &st;
          break;
        default: {
          const Statement* exp = pending;
          pending = nullptr;
          run_op(st, exp, threads_.at(current));
          break;
        }
      }
    }
  }

  struct Stream {
    std::string thread;
    std::vector<const Statement*> stmts;
    std::size_t cursor = 0;
  };

  void run_interleaved(std::uint64_t seed) {
    // Thread declarations run first, in order; the rest executes one
    // statement at a time under a seeded scheduler that preserves
    // per-thread order. expect-* stays glued to its operation.
    std::vector<Stream> streams;
    auto stream_of = [&](const std::string& name) -> Stream& {
      for (auto& s : streams) {
        if (s.thread == name) return s;
      }
      streams.push_back(Stream{name, {}, 0});
      return streams.back();
    };

    std::string context;
    for (const Statement& st : sc_.statements) {
      switch (st.kind) {
        case Statement::Kind::thread_decl:
          threads_[st.name] = engine_.spawn_root_task();
          if (context.empty()) context = st.name;
          break;
        case Statement::Kind::switch_to:
          context = st.name;
          break;
        default:
          stream_of(context).stmts.push_back(&st);
          break;
      }
    }

    std::mt19937_64 rng(seed);
    for (;;) {
      std::vector<Stream*> ready;
      bool work_left = false;
      for (auto& s : streams) {
        if (s.cursor >= s.stmts.size()) continue;
        work_left = true;
        if (!threads_.count(s.thread)) continue;  // created later by clone/fork
        const Statement* next = s.stmts[s.cursor];
        const Statement* op = next;
        if (next->kind == Statement::Kind::expect_fault ||
            next->kind == Statement::Kind::expect_deny) {
          op = s.stmts[s.cursor + 1];
        }
        if (!resolvable(*op)) continue;
        ready.push_back(&s);
      }
      if (!work_left) break;
      if (ready.empty()) {
        std::string stuck;
        for (const auto& s : streams) {
          if (s.cursor < s.stmts.size()) stuck += (stuck.empty() ? "" : ",") + s.thread;
        }
        events_.push_back("FAIL scheduler deadlock: " + stuck);
        ++unexpected_;
        break;
      }
      Stream& s = *ready[rng() % ready.size()];
      const Statement* st = s.stmts[s.cursor];
      const Statement* exp = nullptr;
      if (st->kind == Statement::Kind::expect_fault ||
          st->kind == Statement::Kind::expect_deny) {
        exp = st;
        st = s.stmts[s.cursor + 1];
        s.cursor += 2;
      } else {
        s.cursor += 1;
      }
      run_op(*st, exp, threads_.at(s.thread));
    }
  }

  RunReport finish() {
    RunReport rep;
    rep.expectations_met = met_;
    rep.expectations_total = total_;
    rep.unexpected_failures = unexpected_;
    rep.fault_count = engine_.fault_log().size();
    rep.passed = met_ == total_ && unexpected_ == 0;
    rep.counters = engine_.counters();
    rep.cache = engine_.cache_stats();
    rep.verdict_trace = trace_;
    rep.counters_csv = std::string(kCsvHeader) + "\n" + csv_row("run", rep.counters, rep.cache) + "\n";

    std::ostringstream out;
    out << "scenario " << sc_.name << "\n";
    for (const auto& e : events_) out << e << "\n";
    out << "faults " << rep.fault_count << "\n";
    for (const auto& f : engine_.fault_log()) out << format_fault(f) << "\n";
    out << "counters\n" << rep.counters_csv;
    out << "expectations " << met_ << "/" << total_ << " unexpected " << unexpected_ << "\n";
    out << "result " << (rep.passed ? "PASS" : "FAIL") << "\n";
    rep.text = out.str();
    return rep;
  }
};

}  // namespace

RunReport run_scenario(const Scenario& sc, const RunOptions& opt) {
  Runner r(sc, opt);
  return r.run();
}

}  // namespace utiles::harness
