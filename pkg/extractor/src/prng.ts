/**
 * Deterministic weight generation. Archives must be byte-identical across
 * runs, so the built-in reference architectures draw their parameters from a
 * seeded generator instead of tf initializers.
 */

/** mulberry32: tiny, fast, good-enough 32-bit PRNG with full reproducibility. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** FNV-1a over a string, for turning "model/layer" keys into seeds. */
export function hashSeed(key: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < key.length; i++) {
    h ^= key.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Standard normals via Box-Muller, scaled; rounded through float32. */
export function seededNormals(count: number, seed: number, scale: number): Float32Array {
  const rand = mulberry32(seed);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i += 2) {
    let u = 0;
    while (u === 0) u = rand();
    const v = rand();
    const radius = Math.sqrt(-2.0 * Math.log(u));
    out[i] = radius * Math.cos(2.0 * Math.PI * v) * scale;
    if (i + 1 < count) out[i + 1] = radius * Math.sin(2.0 * Math.PI * v) * scale;
  }
  return out;
}
