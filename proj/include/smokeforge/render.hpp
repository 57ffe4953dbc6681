#pragma once

#include "smokeforge/camera.hpp"
#include "smokeforge/grid.hpp"
#include "smokeforge/image.hpp"

// Grayscale emission-absorption ray marching of density grids, density
// slices and background compositing.
namespace smokeforge::render
{
    using image::Frame;

    struct RenderSettings
    {
        int samples_per_ray = 128;
        double absorption = 1.0; // kappa: extinction per unit density and length
        double emission = 1.0;   // E: radiance per unit density and length
        double background = 0.0;

        void validate() const;
        bool operator==(const RenderSettings &) const = default;
    };

    struct RenderResult
    {
        // Radiance plus transmitted background, clamped to [0,1]. With
        // background 0 this is premultiplied smoke radiance.
        Frame color;
        // 1 - transmittance along each ray.
        Frame alpha;
    };

    // One ray per pixel center through a splat-convention pinhole camera
    // (looking along -Z, +Y up, image rows top to bottom). Each ray's
    // chord through the grid box is split into samples_per_ray equal
    // segments sampled at their midpoints; density is trilinear.
    RenderResult render_density(const ScalarGrid &grid, const camera::CameraPose &pose,
                                const camera::Intrinsics &intrinsics, const RenderSettings &settings);

    // Camera on the +Z side of the box looking down -Z at its center, far
    // enough for the whole XY face to fit with the given field of view.
    struct View
    {
        camera::CameraPose pose;
        camera::Intrinsics intrinsics;
    };
    View front_view(const GridSpec &spec, int width, int height, double fov_x_deg = 40.0);

    // XY density slice at z index k, scaled and clamped to [0,1]; +Y up.
    Frame density_slice(const ScalarGrid &grid, int k, double scale = 1.0);

    // background (1 - alpha) + render, via the haze compositing model with
    // the render as premultiplied smoke radiance.
    Frame composite_onto_background(const Frame &render, const Frame &alpha, const Frame &background);
} // namespace smokeforge::render
