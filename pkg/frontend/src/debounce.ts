// Trailing-edge debounce: rapid calls collapse into one invocation after the
// quiet period. Slider drags therefore cost a single fetch.

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
  pending(): boolean;
}

export const DEBOUNCE_MS = 150;

export function debounce<A extends unknown[]>(fn: (...args: A) => void,
                                              ms: number = DEBOUNCE_MS): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastArgs: A | null = null;

  const wrapped = (...args: A): void => {
    lastArgs = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const call = lastArgs as A;
      lastArgs = null;
      fn(...call);
    }, ms);
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    lastArgs = null;
  };
  wrapped.flush = () => {
    if (timer === null) return;
    clearTimeout(timer);
    timer = null;
    const call = lastArgs as A;
    lastArgs = null;
    fn(...call);
  };
  wrapped.pending = () => timer !== null;
  return wrapped;
}
