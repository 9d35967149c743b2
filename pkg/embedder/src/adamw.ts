/**
 * Adam with decoupled weight decay: the adaptive step uses the raw
 * gradient moments while decay is applied directly to the parameter,
 * matching the optimizer the fine-tuning recipe calls for.
 */

export interface AdamWOptions {
  learningRate: number;
  beta1?: number;
  beta2?: number;
  epsilon?: number;
  weightDecay?: number;
}

export class AdamW {
  readonly learningRate: number;
  private readonly beta1: number;
  private readonly beta2: number;
  private readonly epsilon: number;
  private readonly weightDecay: number;
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private step = 0;

  constructor(private readonly params: Float64Array[], options: AdamWOptions) {
    this.learningRate = options.learningRate;
    this.beta1 = options.beta1 ?? 0.9;
    this.beta2 = options.beta2 ?? 0.999;
    this.epsilon = options.epsilon ?? 1e-8;
    this.weightDecay = options.weightDecay ?? 0.01;
    this.m = params.map((p) => new Float64Array(p.length));
    this.v = params.map((p) => new Float64Array(p.length));
  }

  /** One update; grads must align with the params array. */
  update(grads: Float64Array[]): void {
    this.step += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.step);
    const bc2 = 1 - Math.pow(this.beta2, this.step);
    for (let p = 0; p < this.params.length; p++) {
      const param = this.params[p];
      const grad = grads[p];
      const m = this.m[p];
      const v = this.v[p];
      for (let i = 0; i < param.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * grad[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * grad[i] * grad[i];
        const mHat = m[i] / bc1;
        const vHat = v[i] / bc2;
        param[i] -=
          this.learningRate * (mHat / (Math.sqrt(vHat) + this.epsilon)) +
          this.learningRate * this.weightDecay * param[i];
      }
    }
  }
}
