#include "weakinfo/config.hpp"

#include <cctype>
#include <cstring>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace weakinfo {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

Number Number::of(double x) {
    Number n;
    n.value = x;
    n.exact = rational_from_double(x);
    return n;
}

Utility UtilityConfig::build() const {
    switch (kind) {
        case UtilityKind::log: return Utility::log();
        case UtilityKind::power: return Utility::power(gamma->value);
        case UtilityKind::exponential: return Utility::exponential(alpha->value);
    }
    return Utility::log();
}

BinomialParams RunConfig::binomial() const {
    return {model.s.value, model.h.value, model.k.value, model.r.value, model.periods, model.wealth.value};
}

TrinomialParams RunConfig::trinomial() const {
    return {model.s.value, model.a.value, model.b.value, model.c.value, model.r.value, model.periods, model.wealth.value};
}

CompleteMarketSpec RunConfig::complete() const {
    CompleteMarketSpec spec;
    spec.states = model.states;
    spec.initial_prices.resize(static_cast<Eigen::Index>(model.initial_prices.size()));
    for (std::size_t i = 0; i < model.initial_prices.size(); ++i)
        spec.initial_prices(static_cast<Eigen::Index>(i)) = model.initial_prices[i].value;
    for (const auto& m : model.gross_returns) {
        Eigen::MatrixXd g(static_cast<Eigen::Index>(m.size()), m.empty() ? 0 : static_cast<Eigen::Index>(m.front().size()));
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < m[i].size(); ++j) g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j].value;
        spec.gross_returns.push_back(g);
    }
    spec.r = model.r.value;
    spec.periods = model.periods;
    spec.wealth = model.wealth.value;
    return spec;
}

// --- location scanner -------------------------------------------------------

namespace {

/// Records the line of every value in a JSON document, keyed by JSON pointer. Tolerates
/// malformed input by stopping early; the parser reports those errors itself.
class LineScanner {
public:
    explicit LineScanner(const std::string& text) : s_(text) {
        try {
            skip();
            value("");
        } catch (const std::out_of_range&) {
        }
    }
    const std::map<std::string, int>& lines() const { return lines_; }

private:
    char peek() const {
        if (pos_ >= s_.size()) throw std::out_of_range("eof");
        return s_[pos_];
    }
    void advance() {
        if (peek() == '\n') ++line_;
        ++pos_;
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) advance();
    }
    std::string string() {
        std::string out;
        advance();  // opening quote
        while (peek() != '"') {
            if (peek() == '\\') {
                advance();
            }
            out += peek();
            advance();
        }
        advance();
        return out;
    }
    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out += c;
        }
        return out;
    }
    void value(const std::string& ptr) {
        lines_[ptr] = line_;
        char c = peek();
        if (c == '{') {
            advance();
            skip();
            if (peek() == '}') return advance();
            while (true) {
                skip();
                std::string key = string();
                int key_line = line_;
                skip();
                advance();  // ':'
                skip();
                std::string child = ptr + "/" + escape(key);
                value(child);
                lines_[child] = key_line;
                skip();
                if (peek() == ',') {
                    advance();
                    continue;
                }
                advance();  // '}'
                return;
            }
        }
        if (c == '[') {
            advance();
            skip();
            if (peek() == ']') return advance();
            for (int i = 0;; ++i) {
                skip();
                value(ptr + "/" + std::to_string(i));
                skip();
                if (peek() == ',') {
                    advance();
                    continue;
                }
                advance();
                return;
            }
        }
        if (c == '"') {
            string();
            return;
        }
        while (pos_ < s_.size() && !std::strchr(",]} \t\r\n", s_[pos_])) advance();
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

class Reader {
public:
    explicit Reader(const std::string& text) : lines_(LineScanner(text).lines()) {}

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const { throw ConfigError(msg, line(ptr)); }

    int line(std::string ptr) const {
        while (true) {
            auto it = lines_.find(ptr);
            if (it != lines_.end()) return it->second;
            if (ptr.empty()) return 0;
            ptr = ptr.substr(0, ptr.rfind('/'));
        }
    }

    void keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(ptr, "'" + name(ptr) + "' must be an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!ok.count(it.key())) {
                std::string list;
                for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
                fail(ptr + "/" + it.key(), "unknown key '" + it.key() + "' in " + name(ptr) + " (allowed: " + list + ")");
            }
        }
    }

    const json& need(const json& obj, const std::string& ptr, const char* key) const {
        if (!obj.contains(key)) fail(ptr, "missing required key '" + std::string(key) + "' in " + name(ptr));
        return obj.at(key);
    }

    Number number(const json& v, const std::string& ptr) const {
        if (v.is_number()) return Number::of(v.get<double>());
        if (v.is_string()) {
            Number n;
            try {
                n.exact = parse_rational(v.get<std::string>());
            } catch (const std::exception& e) {
                fail(ptr, name(ptr) + ": " + e.what());
            }
            n.value = to_double(n.exact);
            n.text = true;
            n.literal = v.get<std::string>();
            return n;
        }
        fail(ptr, name(ptr) + " must be a number or a numeric string such as \"1/4\"");
    }

    Number number(const json& obj, const std::string& ptr, const char* key) const {
        return number(need(obj, ptr, key), ptr + "/" + key);
    }

    int integer(const json& obj, const std::string& ptr, const char* key) const {
        const json& v = need(obj, ptr, key);
        if (!v.is_number_integer()) fail(ptr + "/" + key, std::string(key) + " must be an integer");
        return v.get<int>();
    }

    std::string text(const json& v, const std::string& ptr) const {
        if (!v.is_string()) fail(ptr, name(ptr) + " must be a string");
        return v.get<std::string>();
    }

    bool boolean(const json& v, const std::string& ptr) const {
        if (!v.is_boolean()) fail(ptr, name(ptr) + " must be true or false");
        return v.get<bool>();
    }

    std::vector<double> doubles(const json& v, const std::string& ptr) const {
        if (!v.is_array()) fail(ptr, name(ptr) + " must be an array");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], ptr + "/" + std::to_string(i)).value);
        return out;
    }

    static std::string name(const std::string& ptr) { return ptr.empty() ? "config" : ptr.substr(1); }

private:
    std::map<std::string, int> lines_;
};

std::size_t choose(int n, int k) {
    std::size_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
    return c;
}

ModelConfig read_model(const Reader& rd, const json& m) {
    const std::string p = "/model";
    if (!m.is_object()) rd.fail(p, "'model' must be an object");
    ModelConfig out;
    std::string kind = rd.text(rd.need(m, p, "kind"), p + "/kind");
    if (kind == "binomial") {
        rd.keys(m, p, {"kind", "s", "h", "k", "r", "periods", "wealth"});
        out.kind = ModelKind::binomial;
        out.s = rd.number(m, p, "s");
        out.h = rd.number(m, p, "h");
        out.k = rd.number(m, p, "k");
    } else if (kind == "trinomial") {
        rd.keys(m, p, {"kind", "s", "a", "b", "c", "r", "periods", "wealth"});
        out.kind = ModelKind::trinomial;
        out.s = rd.number(m, p, "s");
        out.a = rd.number(m, p, "a");
        out.b = rd.number(m, p, "b");
        out.c = rd.number(m, p, "c");
    } else if (kind == "complete-matrix") {
        rd.keys(m, p, {"kind", "states", "initial_prices", "gross_returns", "r", "periods", "wealth"});
        out.kind = ModelKind::complete_matrix;
        out.states = rd.integer(m, p, "states");
        const json& ip = rd.need(m, p, "initial_prices");
        if (!ip.is_array()) rd.fail(p + "/initial_prices", "initial_prices must be an array");
        for (std::size_t i = 0; i < ip.size(); ++i) out.initial_prices.push_back(rd.number(ip[i], p + "/initial_prices/" + std::to_string(i)));
        const json& g = rd.need(m, p, "gross_returns");
        const std::string gp = p + "/gross_returns";
        if (!g.is_array() || g.empty() || !g[0].is_array()) rd.fail(gp, "gross_returns must be a matrix or a list of matrices");
        // A single matrix is [[...]]; a list of matrices is [[[...]]].
        bool single = !g[0].empty() && !g[0][0].is_array();
        auto read_matrix = [&](const json& mat, const std::string& mp) {
            std::vector<std::vector<Number>> rows;
            if (!mat.is_array()) rd.fail(mp, "return matrix must be an array of rows");
            for (std::size_t i = 0; i < mat.size(); ++i) {
                const std::string rp = mp + "/" + std::to_string(i);
                if (!mat[i].is_array()) rd.fail(rp, "matrix row must be an array");
                std::vector<Number> row;
                for (std::size_t j = 0; j < mat[i].size(); ++j) row.push_back(rd.number(mat[i][j], rp + "/" + std::to_string(j)));
                rows.push_back(std::move(row));
            }
            return rows;
        };
        if (single) {
            out.gross_returns.push_back(read_matrix(g, gp));
        } else {
            for (std::size_t n = 0; n < g.size(); ++n) out.gross_returns.push_back(read_matrix(g[n], gp + "/" + std::to_string(n)));
        }
    } else {
        rd.fail(p + "/kind", "unknown model kind '" + kind + "' (binomial, trinomial, complete-matrix)");
    }
    out.r = rd.number(m, p, "r");
    out.periods = rd.integer(m, p, "periods");
    if (out.periods < 1) rd.fail(p + "/periods", "periods must be >= 1");
    out.wealth = m.contains("wealth") ? rd.number(m, p, "wealth") : Number::of(1.0);
    return out;
}

UtilityConfig read_utility(const Reader& rd, const json& u) {
    const std::string p = "/utility";
    if (!u.is_object()) rd.fail(p, "'utility' must be an object");
    UtilityConfig out;
    std::string kind = rd.text(rd.need(u, p, "kind"), p + "/kind");
    try {
        if (kind == "log") {
            rd.keys(u, p, {"kind"});
            out.kind = UtilityKind::log;
        } else if (kind == "power") {
            rd.keys(u, p, {"kind", "gamma"});
            out.kind = UtilityKind::power;
            out.gamma = rd.number(u, p, "gamma");
            Utility::power(out.gamma->value);
        } else if (kind == "exponential") {
            rd.keys(u, p, {"kind", "alpha"});
            out.kind = UtilityKind::exponential;
            out.alpha = rd.number(u, p, "alpha");
            Utility::exponential(out.alpha->value);
        } else {
            rd.fail(p + "/kind", "unknown utility kind '" + kind + "' (log, power, exponential)");
        }
    } catch (const InvalidParameter& e) {
        rd.fail(p, e.what());
    }
    return out;
}

std::size_t terminal_count(const ModelConfig& m, const std::string& level) {
    switch (m.kind) {
        case ModelKind::binomial: return static_cast<std::size_t>(m.periods + 1);
        case ModelKind::trinomial: {
            if (level == "path") {
                std::size_t n = 1;
                for (int i = 0; i < m.periods; ++i) n *= 3;
                return n;
            }
            return static_cast<std::size_t>((m.periods + 1) * (m.periods + 2) / 2);
        }
        case ModelKind::complete_matrix: {
            if (m.gross_returns.size() == 1) return choose(m.periods + m.states - 1, m.states - 1);
            std::size_t n = 1;
            for (int i = 0; i < m.periods; ++i) n *= static_cast<std::size_t>(m.states);
            return n;
        }
    }
    return 0;
}

AnticipationConfig read_anticipation(const Reader& rd, const json& a, const std::string& p, const ModelConfig& model) {
    rd.keys(a, p, {"name", "preset", "weights", "pruning", "level"});
    AnticipationConfig out;
    if (a.contains("level")) {
        out.level = rd.text(a["level"], p + "/level");
        if (out.level != "terminal" && out.level != "path") rd.fail(p + "/level", "level must be \"terminal\" or \"path\"");
        if (out.level == "path" && model.kind != ModelKind::trinomial)
            rd.fail(p + "/level", "path-level anticipations are only available for the trinomial model");
    }
    if (a.contains("pruning")) out.pruning = rd.boolean(a["pruning"], p + "/pruning");
    if (a.contains("preset") == a.contains("weights")) rd.fail(p, "give exactly one of 'preset' or 'weights'");
    const std::size_t count = terminal_count(model, out.level);
    if (a.contains("preset")) {
        out.preset = rd.text(a["preset"], p + "/preset");
        static const std::set<std::string> kPresets = {"precise", "uniform", "conservative", "risk-neutral"};
        if (!kPresets.count(out.preset))
            rd.fail(p + "/preset", "unknown preset '" + out.preset + "' (precise, uniform, conservative, risk-neutral)");
        if ((out.preset == "precise" || out.preset == "conservative") && count != 6)
            rd.fail(p + "/preset", "preset '" + out.preset + "' needs 6 terminal nodes; the model has " + std::to_string(count));
        out.name = out.preset;
    } else {
        const json& w = a["weights"];
        const std::string wp = p + "/weights";
        if (!w.is_array()) rd.fail(wp, "weights must be an array");
        Rational exact_sum = 0;
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const std::string ip = wp + "/" + std::to_string(i);
            Number n = rd.number(w[i], ip);
            if (n.exact < 0) rd.fail(ip, "anticipation weight " + std::to_string(i) + " is negative");
            if (n.exact == 0 && !out.pruning) rd.fail(ip, "anticipation weight " + std::to_string(i) + " is zero; set \"pruning\": true");
            exact_sum += n.exact;
            sum += n.value;
            out.weights.push_back(n);
        }
        if (out.weights.size() != count)
            rd.fail(wp, "anticipation has " + std::to_string(out.weights.size()) + " weights; the model has " +
                            std::to_string(count) + (out.level == "path" ? " paths" : " terminal nodes"));
        if (exact_sum != 1 && std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(12);
            os << "anticipation weights must sum to 1, they sum to " << sum;
            rd.fail(wp, os.str());
        }
        out.name = a.contains("name") ? std::string() : "custom";
    }
    if (a.contains("name")) out.name = rd.text(a["name"], p + "/name");
    return out;
}

RunSection read_run(const Reader& rd, const json& r) {
    const std::string p = "/run";
    rd.keys(r, p, {"command", "v_grid", "output", "tolerance", "t", "method"});
    RunSection out;
    if (r.contains("command")) {
        out.command = rd.text(r["command"], p + "/command");
        static const std::set<std::string> kCommands = {"measure", "value", "sweep", "trinomial"};
        if (!kCommands.count(out.command)) rd.fail(p + "/command", "unknown command '" + out.command + "'");
    }
    if (r.contains("v_grid")) {
        const json& g = r["v_grid"];
        const std::string gp = p + "/v_grid";
        if (g.is_object()) {
            rd.keys(g, gp, {"from", "to", "points"});
            double from = rd.number(g, gp, "from").value;
            double to = rd.number(g, gp, "to").value;
            int points = rd.integer(g, gp, "points");
            if (points < 1) rd.fail(gp + "/points", "points must be >= 1");
            for (int i = 0; i < points; ++i)
                out.v_grid.push_back(points == 1 ? from : from + (to - from) * i / (points - 1));
        } else {
            out.v_grid = rd.doubles(g, gp);
        }
        if (out.v_grid.empty()) rd.fail(gp, "v_grid is empty");
    }
    if (r.contains("output")) out.output = rd.text(r["output"], p + "/output");
    if (r.contains("tolerance")) {
        out.tolerance = rd.number(r["tolerance"], p + "/tolerance").value;
        if (!(*out.tolerance > 0)) rd.fail(p + "/tolerance", "tolerance must be > 0");
    }
    if (r.contains("t")) {
        out.t = rd.doubles(r["t"], p + "/t");
        for (std::size_t i = 0; i < out.t.size(); ++i)
            if (!(out.t[i] > 0 && out.t[i] < 1)) rd.fail(p + "/t/" + std::to_string(i), "t entries must lie in (0, 1)");
    }
    if (r.contains("method")) {
        out.method = rd.text(r["method"], p + "/method");
        if (out.method != "auto" && out.method != "closed-form" && out.method != "numeric")
            rd.fail(p + "/method", "method must be auto, closed-form or numeric");
    }
    return out;
}

ojson number_json(const Number& n) {
    if (n.text) return n.literal;
    return n.value;
}

}  // namespace

int json_pointer_line(const std::string& text, const std::string& pointer) {
    const auto& lines = LineScanner(text).lines();
    auto it = lines.find(pointer);
    return it == lines.end() ? 0 : it->second;
}

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        int line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) line += text[i] == '\n';
        std::string msg = e.what();
        auto pos = msg.find("syntax error");
        throw ConfigError("invalid JSON: " + (pos == std::string::npos ? msg : msg.substr(pos)), line);
    }
    Reader rd(text);
    rd.keys(doc, "", {"schema", "model", "utility", "anticipation", "run"});
    RunConfig cfg;
    cfg.schema = rd.text(rd.need(doc, "", "schema"), "/schema");
    if (cfg.schema != kSchemaVersion)
        rd.fail("/schema", "unsupported schema '" + cfg.schema + "' (expected '" + kSchemaVersion + "')");
    cfg.model = read_model(rd, rd.need(doc, "", "model"));
    cfg.utility = read_utility(rd, rd.need(doc, "", "utility"));
    const json& a = rd.need(doc, "", "anticipation");
    if (a.is_array()) {
        cfg.anticipation_list = true;
        if (a.empty()) rd.fail("/anticipation", "anticipation list is empty");
        for (std::size_t i = 0; i < a.size(); ++i)
            cfg.anticipations.push_back(read_anticipation(rd, a[i], "/anticipation/" + std::to_string(i), cfg.model));
    } else {
        cfg.anticipations.push_back(read_anticipation(rd, a, "/anticipation", cfg.model));
    }
    if (doc.contains("run")) cfg.run = read_run(rd, doc["run"]);
    if (!cfg.run.t.empty() && static_cast<int>(cfg.run.t.size()) != cfg.model.periods)
        rd.fail("/run/t", "t needs one entry per period (" + std::to_string(cfg.model.periods) + ")");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ojson RunConfig::to_json() const {
    ojson out;
    out["schema"] = schema;
    ojson m;
    switch (model.kind) {
        case ModelKind::binomial:
            m["kind"] = "binomial";
            m["s"] = number_json(model.s);
            m["h"] = number_json(model.h);
            m["k"] = number_json(model.k);
            break;
        case ModelKind::trinomial:
            m["kind"] = "trinomial";
            m["s"] = number_json(model.s);
            m["a"] = number_json(model.a);
            m["b"] = number_json(model.b);
            m["c"] = number_json(model.c);
            break;
        case ModelKind::complete_matrix: {
            m["kind"] = "complete-matrix";
            m["states"] = model.states;
            ojson ip = ojson::array();
            for (const auto& x : model.initial_prices) ip.push_back(number_json(x));
            m["initial_prices"] = ip;
            ojson g = ojson::array();
            for (const auto& mat : model.gross_returns) {
                ojson rows = ojson::array();
                for (const auto& row : mat) {
                    ojson rr = ojson::array();
                    for (const auto& x : row) rr.push_back(number_json(x));
                    rows.push_back(rr);
                }
                g.push_back(rows);
            }
            m["gross_returns"] = g;
            break;
        }
    }
    m["r"] = number_json(model.r);
    m["periods"] = model.periods;
    m["wealth"] = number_json(model.wealth);
    out["model"] = m;

    ojson u;
    switch (utility.kind) {
        case UtilityKind::log: u["kind"] = "log"; break;
        case UtilityKind::power: u["kind"] = "power"; u["gamma"] = number_json(*utility.gamma); break;
        case UtilityKind::exponential: u["kind"] = "exponential"; u["alpha"] = number_json(*utility.alpha); break;
    }
    out["utility"] = u;

    ojson list = ojson::array();
    for (const auto& a : anticipations) {
        ojson o;
        o["name"] = a.name;
        if (!a.preset.empty()) {
            o["preset"] = a.preset;
        } else {
            ojson w = ojson::array();
            for (const auto& x : a.weights) w.push_back(number_json(x));
            o["weights"] = w;
        }
        o["pruning"] = a.pruning;
        if (model.kind == ModelKind::trinomial) o["level"] = a.level;
        list.push_back(o);
    }
    out["anticipation"] = anticipation_list ? list : list.front();

    ojson r;
    if (!run.command.empty()) r["command"] = run.command;
    if (!run.v_grid.empty()) r["v_grid"] = run.v_grid;
    if (!run.output.empty()) r["output"] = run.output;
    if (run.tolerance) r["tolerance"] = *run.tolerance;
    if (!run.t.empty()) r["t"] = run.t;
    r["method"] = run.method;
    out["run"] = r;
    return out;
}

}  // namespace weakinfo
