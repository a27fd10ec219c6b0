#pragma once

#include <span>
#include <string>

#include "pancolor/nn/tensor.hpp"

namespace pancolor::losses {

enum class Adversarial { ragan, vanilla };

struct LossConfig {
    double alpha = 0.005;  // adversarial weight in the generator objective
    Adversarial adversarial = Adversarial::ragan;

    void validate() const {
        if (alpha < 0.0) throw ValidationError("LossConfig: alpha must be >= 0");
    }
};

Adversarial adversarial_from_string(const std::string& s);
std::string to_string(Adversarial a);

// Mean absolute error, normalized by element count so the value is
// resolution-independent.
double l1_reconstruction(const nn::Tensor& pred, const nn::Tensor& target);
nn::Tensor l1_reconstruction_grad(const nn::Tensor& pred, const nn::Tensor& target);

// Relativistic average pair loss over raw scores:
//   -E_1[log sig(s1 - mean(s2))] - E_2[log(1 - sig(s2 - mean(s1)))]
// computed with log-sigmoid identities (no sigmoid-then-log). Expectations
// run over the whole batch and all patch positions. The discriminator
// objective is ragan_pair_loss(real, fake); the generator adversarial term is
// ragan_pair_loss(fake, real).
double ragan_pair_loss(std::span<const double> scores1, std::span<const double> scores2);
void ragan_pair_grad(std::span<const double> scores1, std::span<const double> scores2,
                     std::span<double> grad1, std::span<double> grad2);

// Standard non-saturating pair; scores are raw, sigmoid applied inside.
double vanilla_d_loss(std::span<const double> real, std::span<const double> fake);
double vanilla_g_loss(std::span<const double> fake);
void vanilla_d_grad(std::span<const double> real, std::span<const double> fake,
                    std::span<double> grad_real, std::span<double> grad_fake);
void vanilla_g_grad(std::span<const double> fake, std::span<double> grad_fake);

double generator_objective(double l_rec, double l_adv_g, const LossConfig& cfg);
double discriminator_objective(std::span<const double> real, std::span<const double> fake,
                               const LossConfig& cfg);

// Adversarial term of the generator objective plus its gradient with respect
// to the fake scores (real scores enter only through their mean).
double generator_adversarial(std::span<const double> real, std::span<const double> fake,
                             const LossConfig& cfg, std::span<double> grad_fake);

double log_sigmoid(double z);
double sigmoid(double z);

}  // namespace pancolor::losses
