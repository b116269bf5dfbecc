/** Deterministic PRNG utilities (splitmix64 core, Box-Muller normals). */

export class Rng {
  private state: bigint;
  private spareNormal: number | null = null;

  constructor(seed: number | bigint) {
    this.state = BigInt.asUintN(64, BigInt(seed));
  }

  /** Next uint64 via splitmix64. */
  nextU64(): bigint {
    this.state = BigInt.asUintN(64, this.state + 0x9e3779b97f4a7c15n);
    let z = this.state;
    z = BigInt.asUintN(64, (z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n);
    z = BigInt.asUintN(64, (z ^ (z >> 27n)) * 0x94d049bb133111ebn);
    return z ^ (z >> 31n);
  }

  /** Uniform in [0, 1). */
  next(): number {
    return Number(this.nextU64() >> 11n) / 9007199254740992;
  }

  /** Uniform integer in [0, n). */
  nextInt(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Standard normal. */
  normal(): number {
    if (this.spareNormal !== null) {
      const v = this.spareNormal;
      this.spareNormal = null;
      return v;
    }
    let u = 0;
    let v = 0;
    do {
      u = this.next();
    } while (u === 0);
    v = this.next();
    const r = Math.sqrt(-2.0 * Math.log(u));
    this.spareNormal = r * Math.sin(2.0 * Math.PI * v);
    return r * Math.cos(2.0 * Math.PI * v);
  }
}

/** FNV-1a 64-bit hash, for deriving per-item seeds from strings. */
export function hash64(text: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (let i = 0; i < text.length; i++) {
    h ^= BigInt(text.charCodeAt(i) & 0xff);
    h = BigInt.asUintN(64, h * 0x100000001b3n);
  }
  return h;
}

export function childSeed(base: number | bigint, ...parts: (string | number)[]): bigint {
  let h = BigInt.asUintN(64, BigInt(base) ^ 0x51a2b3c4d5e6f708n);
  for (const p of parts) {
    const ph = typeof p === "string" ? hash64(p) : BigInt.asUintN(64, BigInt(p));
    h = BigInt.asUintN(64, (h ^ ph) * 0x100000001b3n);
  }
  return h;
}
