#include "gcnbert/gradcheck_suite.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "gcnbert/bert_encoder.hpp"
#include "gcnbert/classifier.hpp"
#include "gcnbert/gcn_encoder.hpp"
#include "gcnbert/model.hpp"

namespace gcnbert {

using nlohmann::json;

bool GradCheckReport::passed() const { return failures().empty(); }

std::vector<std::string> GradCheckReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : components) {
        if (!c.passed) out.push_back(c.component);
    }
    return out;
}

json GradCheckReport::to_json() const {
    json comps = json::array();
    for (const auto& c : components) {
        comps.push_back({{"component", c.component},
                         {"max_relative_error", c.result.max_relative_error},
                         {"worst_parameter", c.result.worst_parameter},
                         {"passed", c.passed},
                         {"parameters", c.result.per_parameter}});
    }
    return {{"threshold", threshold}, {"passed", passed()}, {"components", comps}};
}

std::string GradCheckReport::to_table() const {
    std::ostringstream os;
    char line[160];
    for (const auto& c : components) {
        std::snprintf(line, sizeof line, "%-22s %-4s max_rel_err=%.3e\n", c.component.c_str(), c.passed ? "ok" : "FAIL",
                      c.result.max_relative_error);
        os << line;
        for (const auto& [name, err] : c.result.per_parameter) {
            std::snprintf(line, sizeof line, "    %-36s %.3e\n", name.c_str(), err);
            os << line;
        }
    }
    return os.str();
}

ModelConfig gradcheck_toy_config(const ModelConfig& base) {
    ModelConfig c = base;
    c.keypoints = 5;
    c.window = 3;
    c.classes = 4;
    c.gcn.width = 4;
    c.gcn.layers_per_block = 2;
    c.gcn.blocks = 2;
    c.bert.pos_dim = 3;
    c.bert.layers = 2;
    c.bert.heads = 2;
    c.bert.head_dim = 3;
    c.bert.ffn_dim = 6;
    c.validate();
    return c;
}

namespace {

struct CaseState {
    GcnBertModel model;
    std::vector<Parameter> inputs;  // sized once, never resized
    Tensor probe;                   // fixed random weights for scalarizing outputs
    std::size_t target = 0;
};

void randomize(Tensor& t, double stddev, double mean, Rng& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    for (Real& v : t.data()) v = static_cast<Real>(dist(rng));
}

// Σ out ⊙ probe, so every output entry contributes with its own weight.
Var scalarize(Tape& tape, Var out, const Tensor& probe) {
    return sum(mul(out, tape.constant(probe.reshaped(out.shape()))));
}

Tensor random_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    randomize(t, stddev, 0.0, rng);
    return t;
}

}  // namespace

std::vector<GradCheckCase> model_gradcheck_cases(const ModelConfig& toy, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t K = toy.keypoints, T = toy.window, F = toy.gcn.width;
    const std::size_t d = toy.model_width();
    const Real scale_qk = toy.attention_scale();
    const LayerOptions options{scale_qk, toy.bert.standard_residuals};

    auto make_state = [&](std::vector<Tensor> inputs, std::size_t probe_size) {
        auto s = std::make_shared<CaseState>();
        s->model = GcnBertModel(toy, rng());
        for (Parameter* p : s->model.parameters()) {
            const bool is_gain = p->name.find("gamma") != std::string::npos;
            // Matrices scale with fan-in so tanh stays in its linear range.
            const double stddev = p->value.rank() == 2 ? 1.0 / std::sqrt(double(p->value.dim(0))) : 0.5;
            randomize(p->value, is_gain ? 0.1 : stddev, is_gain ? 1.0 : 0.0, rng);
        }
        s->inputs.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            s->inputs.push_back({"input" + std::to_string(i), std::move(inputs[i])});
        }
        s->probe = random_tensor({std::max<std::size_t>(probe_size, 1)}, rng);
        s->target = static_cast<std::size_t>(rng() % toy.classes);
        return s;
    };
    auto with_inputs = [](CaseState& s, std::vector<Parameter*> params) {
        for (Parameter& p : s.inputs) params.push_back(&p);
        return params;
    };

    std::vector<GradCheckCase> cases;

    {
        auto s = make_state({random_tensor({K, F}, rng)}, K * F);
        auto* st = s.get();
        auto& w = st->model.gcn.blocks[0][0];
        cases.push_back({"gcn_layer", s, with_inputs(*st, {&st->model.gcn.adjacency, &w}), [st, &w](Tape& tape) {
                             Var out = gcn_layer(tape.parameter(st->inputs[0]), tape.parameter(st->model.gcn.adjacency),
                                                 tape.parameter(w));
                             return scalarize(tape, out, st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T, K, F}, rng)}, T * K * F);
        auto* st = s.get();
        std::vector<Parameter*> params{&st->model.gcn.adjacency};
        for (Parameter& w : st->model.gcn.blocks[0]) params.push_back(&w);
        cases.push_back({"gcn_block", s, with_inputs(*st, params), [st](Tape& tape) {
                             std::vector<Var> ws;
                             for (const Parameter& w : st->model.gcn.blocks[0]) ws.push_back(tape.parameter(w));
                             Var out = gcn_block(tape.parameter(st->inputs[0]), tape.parameter(st->model.gcn.adjacency), ws);
                             return scalarize(tape, out, st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T, K, 2}, rng, 0.5)}, toy.classes);
        auto* st = s.get();
        cases.push_back({"spatial_encoder_head", s, with_inputs(*st, st->model.gcn.all()), [st](Tape& tape) {
                             auto enc = encode_sequence(tape, tape.parameter(st->inputs[0]), st->model.gcn);
                             return scalarize(tape, enc.u_hat, st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T + 1, d}, rng)}, (T + 1) * toy.bert.head_dim);
        auto* st = s.get();
        auto& head = st->model.bert.layers[0].heads[0];
        cases.push_back({"attention_head", s, with_inputs(*st, {&head.query, &head.key, &head.value}),
                         [st, &head, scale_qk](Tape& tape) {
                             HeadVars h{tape.parameter(head.query), tape.parameter(head.key), tape.parameter(head.value)};
                             return scalarize(tape, attention_head(tape.parameter(st->inputs[0]), h, scale_qk), st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T + 1, d}, rng)}, (T + 1) * toy.bert.head_dim);
        auto* st = s.get();
        std::vector<Parameter*> params;
        for (auto& h : st->model.bert.layers[0].heads) params.insert(params.end(), {&h.query, &h.key, &h.value});
        cases.push_back({"multi_head", s, with_inputs(*st, params), [st, scale_qk](Tape& tape) {
                             std::vector<HeadVars> hs;
                             for (const auto& h : st->model.bert.layers[0].heads) {
                                 hs.push_back({tape.parameter(h.query), tape.parameter(h.key), tape.parameter(h.value)});
                             }
                             return scalarize(tape, multi_head(tape.parameter(st->inputs[0]), hs, scale_qk), st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T + 1, toy.ffn_input_width()}, rng)}, (T + 1) * d);
        auto* st = s.get();
        auto& L = st->model.bert.layers[0];
        cases.push_back({"pffn", s, with_inputs(*st, {&L.ffn_w1, &L.ffn_b1, &L.ffn_w2, &L.ffn_b2}), [st, &L](Tape& tape) {
                             FfnVars f{tape.parameter(L.ffn_w1), tape.parameter(L.ffn_b1), tape.parameter(L.ffn_w2),
                                       tape.parameter(L.ffn_b2)};
                             return scalarize(tape, pffn(tape.parameter(st->inputs[0]), f), st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T + 1, d}, rng)}, (T + 1) * d);
        auto* st = s.get();
        auto& L = st->model.bert.layers[0];
        std::vector<Parameter*> params;
        for (auto& h : L.heads) params.insert(params.end(), {&h.query, &h.key, &h.value});
        params.insert(params.end(), {&L.ffn_w1, &L.ffn_b1, &L.ffn_w2, &L.ffn_b2});
        if (toy.bert.standard_residuals) {
            params.insert(params.end(), {&L.attn_out, &L.ln1_gamma, &L.ln1_beta, &L.ln2_gamma, &L.ln2_beta});
        }
        cases.push_back({"transformer_layer", s, with_inputs(*st, params), [st, &L, options](Tape& tape) {
                             LayerVars vars = bind_layer(tape, L, options.standard_residuals);
                             Var out = transformer_layer(tape.parameter(st->inputs[0]), vars, options);
                             // The layer output is d wide in both modes.
                             return scalarize(tape, out, st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({T, K, F}, rng)}, toy.classes);
        auto* st = s.get();
        cases.push_back({"temporal_encoder_head", s, with_inputs(*st, st->model.bert.all()), [st](Tape& tape) {
                             auto enc = encode_temporal(tape, tape.parameter(st->inputs[0]), st->model.bert,
                                                        st->model.config());
                             return scalarize(tape, enc.v_hat, st->probe);
                         }});
    }
    {
        auto s = make_state({random_tensor({toy.classes}, rng, 0.8), random_tensor({toy.classes}, rng, 0.8)}, 1);
        auto* st = s.get();
        cases.push_back({"fusion_cross_entropy", s, with_inputs(*st, {}), [st](Tape& tape) {
                             Var logits = fuse(tape.parameter(st->inputs[0]), tape.parameter(st->inputs[1]));
                             return classification_loss(logits, st->target);
                         }});
    }
    {
        auto s = make_state({random_tensor({T, K, 2}, rng, 0.5)}, 1);
        auto* st = s.get();
        cases.push_back({"full_loss", s, st->model.parameters(), [st](Tape& tape) {
                             return st->model.loss(tape, st->inputs[0].value, st->target);
                         }});
    }
    return cases;
}

GradCheckReport run_gradcheck(std::vector<GradCheckCase>& cases, double threshold, double epsilon, Stencil stencil) {
    GradCheckReport report;
    report.threshold = threshold;
    for (GradCheckCase& c : cases) {
        ComponentReport r;
        r.component = c.component;
        r.result = grad_check(c.f, c.params, epsilon, stencil);
        r.passed = r.result.max_relative_error < threshold;
        report.components.push_back(std::move(r));
    }
    return report;
}

}  // namespace gcnbert
