/** Closed-form reference curves drawn next to measured data. */

/** Kinetic-energy decay rate of the planar/3D lattice flows.
 *
 * Every velocity component is a Laplacian eigenfield with eigenvalue
 * -8 pi^2, so the velocity decays like exp(-8 pi^2 nu t) and the energy like
 * exp(-16 pi^2 nu t).
 */
export function latticeKeDecayRate(nu: number): number {
  return 16 * Math.PI * Math.PI * nu;
}

export function decayCurve(t: number[], amplitude: number, rate: number): number[] {
  return t.map((tv) => amplitude * Math.exp(-rate * tv));
}

/** Max relative gap between a data series and its reference overlay. */
export function maxRelativeGap(data: number[], reference: number[]): number {
  if (data.length !== reference.length) {
    throw new Error("overlay and data lengths differ");
  }
  let worst = 0;
  for (let i = 0; i < data.length; i++) {
    const denom = Math.abs(reference[i]);
    if (denom === 0) continue;
    worst = Math.max(worst, Math.abs(data[i] - reference[i]) / denom);
  }
  return worst;
}

/** Kolmogorov -5/3 guide anchored at (kappa0, e0). */
export function kolmogorovGuide(kappa: number[], kappa0: number, e0: number): number[] {
  return kappa.map((k) => (k > 0 ? e0 * Math.pow(k / kappa0, -5 / 3) : NaN));
}
