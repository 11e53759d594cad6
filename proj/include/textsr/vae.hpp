#ifndef TEXTSR_VAE_HPP
#define TEXTSR_VAE_HPP

#include "blocks.hpp"

namespace textsr {

// Plain conv autoencoder with three stride-2 stages; images map to 4-channel
// latents at 1/8 spatial resolution. Trained with reconstruction L1 on the
// corpus, then frozen for all later stages.
template <typename T>
struct TinyVAE {
    nn::Conv2d<T> enc_in;
    Downsample<T> enc_down0, enc_down1, enc_down2;
    ResBlock<T> enc_res0, enc_res1, enc_res2;
    nn::GroupNorm<T> enc_norm;
    nn::Conv2d<T> enc_out;

    nn::Conv2d<T> dec_in;
    ResBlock<T> dec_res0, dec_res1, dec_res2;
    Upsample<T> dec_up0, dec_up1, dec_up2;
    nn::Conv2d<T> dec_out;

    int64_t image_channels = 1, latent_channels = 4;

    TinyVAE() = default;
    TinyVAE(nn::ParamSet<T>& ps, const std::string& name, int64_t image_ch, int64_t base,
            int64_t latent_ch = 4)
        : enc_in(ps, name + ".enc.in", image_ch, base, 3, 1, 1),
          enc_down0(ps, name + ".enc.down0", base, base * 2),
          enc_down1(ps, name + ".enc.down1", base * 2, base * 3),
          enc_down2(ps, name + ".enc.down2", base * 3, base * 4),
          enc_res0(ps, name + ".enc.res0", base * 2, base * 2),
          enc_res1(ps, name + ".enc.res1", base * 3, base * 3),
          enc_res2(ps, name + ".enc.res2", base * 4, base * 4),
          enc_norm(ps, name + ".enc.norm", base * 4),
          enc_out(ps, name + ".enc.out", base * 4, latent_ch, 3, 1, 1),
          dec_in(ps, name + ".dec.in", latent_ch, base * 4, 3, 1, 1),
          dec_res0(ps, name + ".dec.res0", base * 4, base * 4),
          dec_res1(ps, name + ".dec.res1", base * 3, base * 3),
          dec_res2(ps, name + ".dec.res2", base * 2, base * 2),
          dec_up0(ps, name + ".dec.up0", base * 4, base * 3),
          dec_up1(ps, name + ".dec.up1", base * 3, base * 2),
          dec_up2(ps, name + ".dec.up2", base * 2, base),
          dec_out(ps, name + ".dec.out", base, image_ch, 3, 1, 1),
          image_channels(image_ch),
          latent_channels(latent_ch) {}

    static void check_dims(const ad::Value<T>& x) {
        if (x.size(2) % 8 != 0 || x.size(3) % 8 != 0)
            throw ShapeError("vae: image dims " + std::to_string(x.size(2)) + "x" +
                             std::to_string(x.size(3)) + " not divisible by 8");
    }

    // [0,1] image -> latent (B, latent_ch, H/8, W/8)
    ad::Value<T> encode(const ad::Value<T>& x01) const {
        check_dims(x01);
        auto x = ad::add_scalar(ad::scale(x01, T(2)), T(-1));
        auto h = ad::silu(enc_in.forward(x));
        h = enc_res0.forward(enc_down0.forward(h));
        h = enc_res1.forward(enc_down1.forward(h));
        h = enc_res2.forward(enc_down2.forward(h));
        return enc_out.forward(ad::silu(enc_norm.forward(h)));
    }

    // latent -> [0,1] image ((tanh + 1) / 2 at the boundary)
    ad::Value<T> decode(const ad::Value<T>& z) const {
        auto h = ad::silu(dec_in.forward(z));
        h = dec_up0.forward(dec_res0.forward(h));
        h = dec_up1.forward(dec_res1.forward(h));
        h = dec_up2.forward(dec_res2.forward(h));
        auto out = ad::tanh_op(dec_out.forward(ad::silu(h)));
        return ad::scale(ad::add_scalar(out, T(1)), T(0.5));
    }
};

}  // namespace textsr

#endif  // TEXTSR_VAE_HPP
