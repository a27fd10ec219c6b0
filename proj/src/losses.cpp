#include "pancolor/losses.hpp"

#include <cmath>
#include <vector>

namespace pancolor::losses {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sigmoid(double z) {
    // log(1 + exp(-|z|)) never overflows; the identity covers both signs.
    return z < 0.0 ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
}

Adversarial adversarial_from_string(const std::string& s) {
    if (s == "ragan") return Adversarial::ragan;
    if (s == "vanilla") return Adversarial::vanilla;
    throw ValidationError("unknown adversarial loss variant: " + s);
}

std::string to_string(Adversarial a) {
    return a == Adversarial::ragan ? "ragan" : "vanilla";
}

double l1_reconstruction(const nn::Tensor& pred, const nn::Tensor& target) {
    nn::check_same_shape(pred, target, "l1_reconstruction");
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred.v[i] - target.v[i]);
    return sum / static_cast<double>(pred.size());
}

nn::Tensor l1_reconstruction_grad(const nn::Tensor& pred, const nn::Tensor& target) {
    nn::check_same_shape(pred, target, "l1_reconstruction_grad");
    nn::Tensor g(pred.n, pred.c, pred.h, pred.w);
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.v[i] - target.v[i];
        g.v[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return g;
}

namespace {

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

void require_nonempty(std::span<const double> xs, const char* what) {
    if (xs.empty()) throw ValidationError(std::string(what) + ": empty score batch");
}

}  // namespace

double ragan_pair_loss(std::span<const double> scores1, std::span<const double> scores2) {
    require_nonempty(scores1, "ragan_pair_loss");
    require_nonempty(scores2, "ragan_pair_loss");
    const double m1 = mean_of(scores1);
    const double m2 = mean_of(scores2);
    double term1 = 0.0;
    for (double s : scores1) term1 += log_sigmoid(s - m2);
    double term2 = 0.0;
    // log(1 - sig(z)) == log_sigmoid(-z)
    for (double s : scores2) term2 += log_sigmoid(m1 - s);
    return -term1 / static_cast<double>(scores1.size()) -
           term2 / static_cast<double>(scores2.size());
}

void ragan_pair_grad(std::span<const double> scores1, std::span<const double> scores2,
                     std::span<double> grad1, std::span<double> grad2) {
    require_nonempty(scores1, "ragan_pair_grad");
    require_nonempty(scores2, "ragan_pair_grad");
    if (grad1.size() != scores1.size() || grad2.size() != scores2.size())
        throw ValidationError("ragan_pair_grad: gradient span sizes must match scores");
    const double n1 = static_cast<double>(scores1.size());
    const double n2 = static_cast<double>(scores2.size());
    const double m1 = mean_of(scores1);
    const double m2 = mean_of(scores2);
    // d log_sigmoid(z)/dz = sigmoid(-z)
    double sum_sig1 = 0.0;  // sum over i of sigmoid(-(s1_i - m2))
    for (double s : scores1) sum_sig1 += sigmoid(m2 - s);
    double sum_sig2 = 0.0;  // sum over j of sigmoid(-(m1 - s2_j))
    for (double s : scores2) sum_sig2 += sigmoid(s - m1);
    for (size_t i = 0; i < scores1.size(); ++i)
        grad1[i] = -sigmoid(m2 - scores1[i]) / n1 - sum_sig2 / (n1 * n2);
    for (size_t j = 0; j < scores2.size(); ++j)
        grad2[j] = sigmoid(scores2[j] - m1) / n2 + sum_sig1 / (n1 * n2);
}

double vanilla_d_loss(std::span<const double> real, std::span<const double> fake) {
    require_nonempty(real, "vanilla_d_loss");
    require_nonempty(fake, "vanilla_d_loss");
    double lr = 0.0;
    for (double s : real) lr += log_sigmoid(s);
    double lf = 0.0;
    for (double s : fake) lf += log_sigmoid(-s);
    return -lr / static_cast<double>(real.size()) - lf / static_cast<double>(fake.size());
}

double vanilla_g_loss(std::span<const double> fake) {
    require_nonempty(fake, "vanilla_g_loss");
    double l = 0.0;
    for (double s : fake) l += log_sigmoid(s);
    return -l / static_cast<double>(fake.size());
}

void vanilla_d_grad(std::span<const double> real, std::span<const double> fake,
                    std::span<double> grad_real, std::span<double> grad_fake) {
    require_nonempty(real, "vanilla_d_grad");
    require_nonempty(fake, "vanilla_d_grad");
    const double nr = static_cast<double>(real.size());
    const double nf = static_cast<double>(fake.size());
    for (size_t i = 0; i < real.size(); ++i) grad_real[i] = -sigmoid(-real[i]) / nr;
    for (size_t j = 0; j < fake.size(); ++j) grad_fake[j] = sigmoid(fake[j]) / nf;
}

void vanilla_g_grad(std::span<const double> fake, std::span<double> grad_fake) {
    require_nonempty(fake, "vanilla_g_grad");
    const double nf = static_cast<double>(fake.size());
    for (size_t j = 0; j < fake.size(); ++j) grad_fake[j] = -sigmoid(-fake[j]) / nf;
}

double generator_objective(double l_rec, double l_adv_g, const LossConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(l_rec) || !std::isfinite(l_adv_g))
        throw ValidationError("generator_objective: non-finite loss terms");
    return l_rec + cfg.alpha * l_adv_g;
}

double discriminator_objective(std::span<const double> real, std::span<const double> fake,
                               const LossConfig& cfg) {
    return cfg.adversarial == Adversarial::ragan ? ragan_pair_loss(real, fake)
                                                 : vanilla_d_loss(real, fake);
}

double generator_adversarial(std::span<const double> real, std::span<const double> fake,
                             const LossConfig& cfg, std::span<double> grad_fake) {
    if (cfg.adversarial == Adversarial::ragan) {
        // L_G^adv = ragan(fake, real); only the fake-score gradient reaches
        // the generator (the discriminator is frozen during the G update).
        std::vector<double> grad_real(real.size());
        ragan_pair_grad(fake, real, grad_fake, grad_real);
        return ragan_pair_loss(fake, real);
    }
    vanilla_g_grad(fake, grad_fake);
    return vanilla_g_loss(fake);
}

}  // namespace pancolor::losses
