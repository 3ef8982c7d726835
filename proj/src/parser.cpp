// Front-end for the fact/rule language plus the Program container.
#include <algorithm>
#include <cctype>
#include <set>

#include "mlrisk/datalog.hpp"
#include "mlrisk/error.hpp"

namespace mlrisk::datalog {

namespace {

enum class Tok { Ident, Variable, String, Integer, LParen, RParen, Comma, Dot, Implies, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int column = 1;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

class Lexer {
 public:
  Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

  // Annotations collected from `%@` comments since the last call.
  std::map<std::string, std::string> take_annotations() { return std::exchange(annotations_, {}); }

  Token next() {
    skip_space_and_comments();
    Token tok;
    tok.line = line_;
    tok.column = column_;
    if (pos_ >= text_.size()) return tok;

    char c = text_[pos_];
    if (c == '(') return single(tok, Tok::LParen);
    if (c == ')') return single(tok, Tok::RParen);
    if (c == ',') return single(tok, Tok::Comma);
    if (c == '.') return single(tok, Tok::Dot);
    if (c == ':') {
      if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
        advance();
        advance();
        tok.kind = Tok::Implies;
        tok.text = ":-";
        return tok;
      }
      fail(tok, "unexpected ':' (did you mean ':-'?)");
    }
    if (c == '\'' || c == '"') return quoted(tok, c);
    if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
        (c == '-' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) != 0)) {
      tok.kind = Tok::Integer;
      tok.text += c;
      advance();
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])) != 0) {
        tok.text += text_[pos_];
        advance();
      }
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_') {
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) {
        tok.text += text_[pos_];
        advance();
      }
      bool upper = std::isupper(static_cast<unsigned char>(tok.text[0])) != 0 || tok.text[0] == '_';
      tok.kind = upper ? Tok::Variable : Tok::Ident;
      return tok;
    }
    fail(tok, std::string("unexpected character '") + c + "'");
  }

  [[noreturn]] void fail(const Token& at, const std::string& message) const {
    throw ParseError(file_, at.line, at.column, message);
  }

  const std::string& file() const { return file_; }

 private:
  Token single(Token tok, Tok kind) {
    tok.kind = kind;
    tok.text = std::string(1, text_[pos_]);
    advance();
    return tok;
  }

  Token quoted(Token tok, char quote) {
    tok.kind = Tok::String;
    tok.text += quote;
    advance();
    while (true) {
      if (pos_ >= text_.size() || text_[pos_] == '\n') fail(tok, "unterminated quoted string");
      char c = text_[pos_];
      tok.text += c;
      advance();
      if (c == '\\' && pos_ < text_.size()) {
        tok.text += text_[pos_];
        advance();
        continue;
      }
      if (c == quote) break;
    }
    return tok;
  }

  void advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      // Columns count code points, not UTF-8 continuation bytes.
      ++column_;
    }
  }

  void skip_space_and_comments() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) != 0) {
        advance();
      } else if (c == '%') {
        std::size_t end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        std::string_view comment = text_.substr(pos_, end - pos_);
        if (comment.starts_with("%@")) annotate(comment.substr(2));
        while (pos_ < end) advance();
      } else {
        break;
      }
    }
  }

  void annotate(std::string_view body) {
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())) != 0) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())) != 0) s.remove_suffix(1);
      return std::string(s);
    };
    auto colon = body.find(':');
    if (colon == std::string_view::npos) {
      annotations_["label"] = trim(body);
    } else {
      annotations_[trim(body.substr(0, colon))] = trim(body.substr(colon + 1));
    }
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
  std::map<std::string, std::string> annotations_;
};

class Parser {
 public:
  Parser(std::string_view text, std::string file) : lexer_(text, std::move(file)) { bump(); }

  Program program() {
    Program program;
    std::map<std::string, int> per_head;
    while (tok_.kind != Tok::End) {
      auto annotations = lexer_.take_annotations();
      anon_counter_ = 0;
      SourcePos pos{lexer_.file(), tok_.line, tok_.column};
      Atom head = atom();
      if (tok_.kind == Tok::Dot) {
        bump();
        program.add_fact(head, pos);
        continue;
      }
      expect(Tok::Implies, "expected '.' or ':-' after atom");
      Rule rule;
      rule.pos = pos;
      rule.body.push_back(atom());
      while (tok_.kind == Tok::Comma) {
        bump();
        rule.body.push_back(atom());
      }
      expect(Tok::Dot, "expected ',' or '.' after body atom");
      rule.head = std::move(head);
      int n = ++per_head[rule.head.predicate];
      if (auto it = annotations.find("id"); it != annotations.end()) {
        rule.id = it->second;
      } else {
        std::string stem = lexer_.file();
        if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
        rule.id = (stem.empty() ? "" : stem + ":") + rule.head.predicate + "#" + std::to_string(n);
      }
      auto label = annotations.find("label");
      rule.label = label != annotations.end() ? label->second : rule.head.predicate;
      annotations.erase("id");
      annotations.erase("label");
      rule.annotations = std::move(annotations);
      program.add_rule(std::move(rule));
    }
    return program;
  }

  Atom single_atom() {
    Atom a = atom();
    if (tok_.kind == Tok::Dot) bump();
    if (tok_.kind != Tok::End) lexer_.fail(tok_, "unexpected text after atom");
    return a;
  }

 private:
  Atom atom() {
    if (tok_.kind != Tok::Ident) lexer_.fail(tok_, "expected a predicate name (lowercase identifier)");
    Atom a;
    a.predicate = tok_.text;
    bump();
    if (tok_.kind != Tok::LParen) return a;
    bump();
    if (tok_.kind == Tok::RParen) {
      bump();
      return a;
    }
    a.args.push_back(term());
    while (tok_.kind == Tok::Comma) {
      bump();
      a.args.push_back(term());
    }
    expect(Tok::RParen, "expected ',' or ')' in argument list");
    return a;
  }

  Term term() {
    Term t;
    switch (tok_.kind) {
      case Tok::Variable:
        if (tok_.text == "_") {
          t = Term::variable("_" + std::to_string(++anon_counter_));
        } else {
          t = Term::variable(tok_.text);
        }
        break;
      case Tok::Ident:
      case Tok::String:
      case Tok::Integer:
        t = Term::constant(tok_.text);
        break;
      default:
        lexer_.fail(tok_, "expected a term");
    }
    bump();
    if (tok_.kind == Tok::LParen) lexer_.fail(tok_, "function symbols are not supported");
    return t;
  }

  void expect(Tok kind, const char* message) {
    if (tok_.kind != kind) lexer_.fail(tok_, message);
    bump();
  }

  void bump() { tok_ = lexer_.next(); }

  Lexer lexer_;
  Token tok_;
  int anon_counter_ = 0;
};

}  // namespace

void Program::register_predicate(const std::string& name, std::size_t arity, const SourcePos& pos) {
  auto [it, inserted] = predicates_.emplace(name, PredicateUse{arity, pos});
  if (!inserted && it->second.arity != arity) {
    throw ValidationError("arity conflict for predicate '" + name + "': used with arity " +
                          std::to_string(arity) + " at " + pos.to_string() + " but arity " +
                          std::to_string(it->second.arity) + " at " +
                          it->second.first_use.to_string());
  }
}

void Program::add_fact(const Atom& fact, const SourcePos& pos) {
  for (const auto& t : fact.args) {
    if (t.is_variable())
      throw ValidationError("fact " + fact.to_string() + " at " + pos.to_string() +
                            " is not ground (variable " + t.text + ")");
  }
  register_predicate(fact.predicate, fact.arity(), pos);
  if (fact_set_.insert(fact).second) facts_.push_back(fact);
}

void Program::add_rule(Rule rule) {
  std::set<std::string> body_vars;
  for (const auto& b : rule.body)
    for (const auto& t : b.args)
      if (t.is_variable()) body_vars.insert(t.text);
  for (const auto& t : rule.head.args) {
    if (t.is_variable() && !body_vars.contains(t.text)) {
      throw ValidationError("rule '" + rule.id + "' at " + rule.pos.to_string() +
                            " violates range restriction: head variable " + t.text +
                            " does not appear in the body");
    }
  }
  if (rule.body.empty())
    throw ValidationError("rule '" + rule.id + "' at " + rule.pos.to_string() + " has an empty body");
  register_predicate(rule.head.predicate, rule.head.arity(), rule.pos);
  for (const auto& b : rule.body) register_predicate(b.predicate, b.arity(), rule.pos);
  if (rule_ids_.contains(rule.id))
    throw ValidationError("duplicate rule id '" + rule.id + "' at " + rule.pos.to_string());
  rule_ids_.emplace(rule.id, rules_.size());
  rules_.push_back(std::move(rule));
}

void Program::merge(const Program& other) {
  for (const auto& [name, use] : other.predicates_) register_predicate(name, use.arity, use.first_use);
  for (const auto& f : other.facts_) add_fact(f, other.predicates_.at(f.predicate).first_use);
  for (const auto& r : other.rules_) add_rule(r);
}

const Rule* Program::find_rule(std::string_view id) const {
  auto it = rule_ids_.find(std::string(id));
  return it == rule_ids_.end() ? nullptr : &rules_[it->second];
}

std::vector<std::string> Program::undefined_predicates(const std::set<std::string>& declared) const {
  std::set<std::string> defined(declared.begin(), declared.end());
  for (const auto& f : facts_) defined.insert(f.predicate);
  for (const auto& r : rules_) defined.insert(r.head.predicate);
  std::set<std::string> missing;
  for (const auto& r : rules_)
    for (const auto& b : r.body)
      if (!defined.contains(b.predicate)) missing.insert(b.predicate);
  return {missing.begin(), missing.end()};
}

Program parse_program(std::string_view text, const std::string& file) {
  return Parser(text, file).program();
}

Atom parse_atom(std::string_view text) { return Parser(text, "<atom>").single_atom(); }

std::string to_source(const Program& program) {
  std::string out;
  for (const auto& rule : program.rules()) {
    out += "%@ id: " + rule.id + "\n";
    out += "%@ label: " + rule.label + "\n";
    for (const auto& [key, value] : rule.annotations) out += "%@ " + key + ": " + value + "\n";
    out += rule.to_string();
    out += "\n";
  }
  for (const auto& fact : program.facts()) out += fact.to_string() + ".\n";
  return out;
}

}  // namespace mlrisk::datalog
