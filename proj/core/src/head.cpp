#include "longtail/head.hpp"

#include "longtail/rng.hpp"
#include "text.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>

namespace longtail {

std::string_view to_string(HeadKind kind)
{
    switch (kind) {
    case HeadKind::linear: return "linear";
    case HeadKind::tau_normalized: return "tau_normalized";
    case HeadKind::ncm: return "ncm";
    case HeadKind::cosine: return "cosine";
    case HeadKind::mlp: return "mlp";
    }
    return "?";
}

HeadKind parse_head_kind(std::string_view text)
{
    for (auto kind : {HeadKind::linear, HeadKind::tau_normalized, HeadKind::ncm,
                      HeadKind::cosine, HeadKind::mlp}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    throw Error("unknown head kind '" + std::string(text) + "'");
}

int ClassifierHead::input_dim() const
{
    return hidden.empty() ? feature_dim() : static_cast<int>(hidden.front().weights.rows());
}

RowMatrix ClassifierHead::represent(const RowMatrix& inputs) const
{
    if (hidden.empty()) {
        return inputs;
    }
    RowMatrix activations = inputs;
    for (const auto& layer : hidden) {
        RowMatrix next = activations * layer.weights;
        next.rowwise() += layer.bias.transpose();
        activations = next.cwiseMax(0.0);
    }
    return activations;
}

namespace {

// Rows of `features` against columns of `weights`, as cosine similarities.
// Zero rows or columns give similarity 0.
RowMatrix cosine_scores(const RowMatrix& features, const Matrix& weights)
{
    RowMatrix scores = features * weights;
    const Vector row_norms = features.rowwise().norm();
    const Vector col_norms = weights.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            const double denom = row_norms[i] * col_norms[j];
            scores(i, j) = denom > 0.0 ? scores(i, j) / denom : 0.0;
        }
    }
    return scores;
}

} // namespace

RowMatrix ClassifierHead::logits_from_features(const RowMatrix& features) const
{
    if (features.cols() != weights.rows()) {
        throw Error("feature dimension " + std::to_string(features.cols())
                    + " does not match head input " + std::to_string(weights.rows()));
    }
    RowMatrix out;
    switch (kind) {
    case HeadKind::ncm:
        out = cosine_scores(features, weights);
        break;
    case HeadKind::cosine:
        out = cosine_scores(rectify_input ? RowMatrix(features.cwiseMax(0.0)) : features, weights)
              * cosine_scale;
        break;
    default:
        out = features * weights;
        break;
    }
    if (scales) {
        out.array().rowwise() *= scales->transpose().array();
    }
    if (bias) {
        out.rowwise() += bias->transpose();
    }
    return out;
}

RowMatrix ClassifierHead::logits(const RowMatrix& inputs) const
{
    if (inputs.cols() != input_dim()) {
        throw Error("input dimension " + std::to_string(inputs.cols())
                    + " does not match head input " + std::to_string(input_dim()));
    }
    return logits_from_features(represent(inputs));
}

Vector ClassifierHead::logits_one(const Eigen::Ref<const Vector>& input) const
{
    RowMatrix row = input.transpose();
    return logits(row).row(0).transpose();
}

int ClassifierHead::predict_one(const Eigen::Ref<const Vector>& input) const
{
    return argmax(logits_one(input));
}

std::vector<int> ClassifierHead::predict(const RowMatrix& inputs) const
{
    const RowMatrix scores = logits(inputs);
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = argmax(scores.row(i).transpose());
    }
    return out;
}

Vector ClassifierHead::class_norms() const
{
    Vector norms = weights.colwise().norm().transpose();
    if (scales) {
        norms.array() *= scales->array().abs();
    }
    return norms;
}

void ClassifierHead::validate() const
{
    const auto classes = weights.cols();
    if (classes < 1 || weights.rows() < 1) {
        throw Error("head has empty weight matrix");
    }
    if (!weights.allFinite()) {
        throw Error("head weights are not finite");
    }
    if (bias && bias->size() != classes) {
        throw Error("head bias has wrong length");
    }
    if (scales && scales->size() != classes) {
        throw Error("head scales have wrong length");
    }
    if (kind == HeadKind::tau_normalized && bias) {
        throw Error("tau-normalized heads are bias-free");
    }
    if (!hidden.empty() && kind != HeadKind::mlp) {
        throw Error("only mlp heads carry hidden layers");
    }
    Eigen::Index width = hidden.empty() ? weights.rows() : hidden.front().weights.rows();
    for (const auto& layer : hidden) {
        if (layer.weights.rows() != width || layer.bias.size() != layer.weights.cols()) {
            throw Error("inconsistent hidden layer shapes");
        }
        width = layer.weights.cols();
    }
    if (width != weights.rows()) {
        throw Error("last hidden width does not match classifier input");
    }
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Matrix m(rows, cols);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
    return m;
}

} // namespace

ClassifierHead init_head(int dim, int num_classes, HeadKind kind, std::uint64_t seed,
                         const std::vector<int>& hidden_widths)
{
    if (dim < 1 || num_classes < 1) {
        throw Error("init_head: dimensions must be positive");
    }
    if (!hidden_widths.empty() && kind != HeadKind::mlp) {
        throw Error("init_head: hidden widths given for a non-mlp head");
    }
    Rng rng(derive_seed(seed, 0x4EAD));
    ClassifierHead head;
    head.kind = kind;
    Eigen::Index width = dim;
    for (int w : hidden_widths) {
        if (w < 1) {
            throw Error("init_head: hidden widths must be positive");
        }
        DenseLayer layer{uniform_matrix(width, w, rng), Vector::Zero(w)};
        head.hidden.push_back(std::move(layer));
        width = w;
    }
    head.weights = uniform_matrix(width, num_classes, rng);
    if (kind == HeadKind::linear || kind == HeadKind::mlp) {
        head.bias = Vector::Zero(num_classes);
    }
    return head;
}

namespace {

void write_row(std::ostream& out, const Eigen::Ref<const Vector>& values)
{
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out << ' ';
        }
        out << values[i];
    }
    out << '\n';
}

void write_matrix(std::ostream& out, const Matrix& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        write_row(out, m.row(i).transpose());
    }
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-comment line, tokenised. Throws at EOF.
    std::vector<std::string_view> next(const char* what)
    {
        if (!try_next()) {
            throw Error(std::string("head file: unexpected end of file, expected ") + what);
        }
        return tokens_;
    }

    bool try_next()
    {
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (!detail::is_skippable(line_)) {
                tokens_ = detail::tokenize(line_);
                return true;
            }
        }
        return false;
    }

    const std::vector<std::string_view>& tokens() const { return tokens_; }

    [[noreturn]] void fail(const std::string& message) const
    {
        throw Error("head file line " + std::to_string(line_no_) + ": " + message);
    }

    double number(std::string_view token) const
    {
        double value = 0.0;
        if (!detail::parse_number(token, value) || !std::isfinite(value)) {
            fail("bad number '" + std::string(token) + "'");
        }
        return value;
    }

    long long integer(std::string_view token) const
    {
        long long value = 0;
        if (!detail::parse_number(token, value)) {
            fail("bad integer '" + std::string(token) + "'");
        }
        return value;
    }

    Vector values(std::span<const std::string_view> tokens, Eigen::Index expected) const
    {
        if (static_cast<Eigen::Index>(tokens.size()) != expected) {
            fail("expected " + std::to_string(expected) + " values, got "
                 + std::to_string(tokens.size()));
        }
        Vector v(expected);
        for (Eigen::Index i = 0; i < expected; ++i) {
            v[i] = number(tokens[static_cast<std::size_t>(i)]);
        }
        return v;
    }

    Matrix matrix(Eigen::Index rows, Eigen::Index cols, const char* what)
    {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto tokens = next(what);
            m.row(i) = values(tokens, cols).transpose();
        }
        return m;
    }

private:
    std::istream& in_;
    std::string line_;
    std::vector<std::string_view> tokens_;
    std::size_t line_no_ = 0;
};

} // namespace

void write_head(const ClassifierHead& head, std::ostream& out)
{
    head.validate();
    std::ostringstream body;
    body.precision(17);
    body << head.input_dim() << ' ' << head.num_classes() << ' ' << to_string(head.kind) << '\n';
    if (head.kind == HeadKind::mlp) {
        body << "hidden " << head.hidden.size() << '\n';
        for (const auto& layer : head.hidden) {
            body << "layer " << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
            write_matrix(body, layer.weights);
            body << "layer_bias ";
            write_row(body, layer.bias);
        }
    }
    write_matrix(body, head.weights);
    if (head.bias) {
        body << "bias ";
        write_row(body, *head.bias);
    }
    if (head.scales) {
        body << "scales ";
        write_row(body, *head.scales);
    }
    if (head.kind == HeadKind::cosine) {
        body << "cosine " << head.cosine_scale << ' ' << (head.rectify_input ? 1 : 0) << '\n';
    }
    out << body.str();
}

ClassifierHead read_head(std::istream& in)
{
    LineReader reader(in);
    auto header = reader.next("header \"d C kind\"");
    if (header.size() != 3) {
        reader.fail("malformed header, expected \"d C kind\"");
    }
    const auto dim = reader.integer(header[0]);
    const auto classes = reader.integer(header[1]);
    if (dim < 1 || classes < 1) {
        reader.fail("dimensions must be positive");
    }
    ClassifierHead head;
    try {
        head.kind = parse_head_kind(header[2]);
    } catch (const Error& e) {
        reader.fail(e.what());
    }

    Eigen::Index width = dim;
    if (head.kind == HeadKind::mlp) {
        const auto tokens = reader.next("hidden layer count");
        if (tokens.size() != 2 || tokens[0] != "hidden") {
            reader.fail("expected \"hidden k\"");
        }
        const auto layers = reader.integer(tokens[1]);
        for (long long l = 0; l < layers; ++l) {
            const auto shape = reader.next("layer shape");
            if (shape.size() != 3 || shape[0] != "layer") {
                reader.fail("expected \"layer in out\"");
            }
            const auto rows = reader.integer(shape[1]);
            const auto cols = reader.integer(shape[2]);
            if (rows != width || cols < 1) {
                reader.fail("layer shape does not chain");
            }
            DenseLayer layer;
            layer.weights = reader.matrix(rows, cols, "layer weights");
            const auto bias = reader.next("layer_bias");
            if (bias.empty() || bias[0] != "layer_bias") {
                reader.fail("expected layer_bias row");
            }
            layer.bias = reader.values(std::span(bias).subspan(1), cols);
            head.hidden.push_back(std::move(layer));
            width = cols;
        }
    }
    head.weights = reader.matrix(width, classes, "weight row");

    while (reader.try_next()) {
        const auto& tokens = reader.tokens();
        const auto rest = std::span(tokens).subspan(1);
        if (tokens[0] == "bias" && !head.bias) {
            head.bias = reader.values(rest, classes);
        } else if (tokens[0] == "scales" && !head.scales) {
            head.scales = reader.values(rest, classes);
        } else if (tokens[0] == "cosine" && head.kind == HeadKind::cosine && rest.size() == 2) {
            head.cosine_scale = reader.number(rest[0]);
            head.rectify_input = reader.integer(rest[1]) != 0;
        } else {
            reader.fail("unexpected line starting with '" + std::string(tokens[0]) + "'");
        }
    }
    head.validate();
    return head;
}

void save_head(const ClassifierHead& head, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write head file " + path.string());
    }
    write_head(head, out);
}

ClassifierHead load_head(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open head file " + path.string());
    }
    try {
        return read_head(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

} // namespace longtail
