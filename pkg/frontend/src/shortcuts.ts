// Keyboard shortcuts dispatch the same actions as the toolbar buttons.

export interface ShortcutActions {
  advanceFrame(): void;
  confirmProposal(): void;
  cancelProposal(): void;
  deleteSelected(): void;
  assignClass(label: string): void;
  saveSession(): void;
}

export const CLASS_KEYS: Record<string, string> = {
  "1": "car",
  "2": "pedestrian",
  "3": "cyclist",
  "4": "truck",
  "5": "van",
  "6": "other",
};

/** Map a keydown to its action; exported separately so tests can cover the
 * routing table without a DOM. Returns true when the key was handled. */
export function dispatchKey(key: string, actions: ShortcutActions): boolean {
  if (key in CLASS_KEYS) {
    actions.assignClass(CLASS_KEYS[key]);
    return true;
  }
  switch (key) {
    case "n":
    case "ArrowRight":
      actions.advanceFrame();
      return true;
    case "Enter":
      actions.confirmProposal();
      return true;
    case "Escape":
      actions.cancelProposal();
      return true;
    case "Delete":
    case "Backspace":
      actions.deleteSelected();
      return true;
    case "s":
      actions.saveSession();
      return true;
    default:
      return false;
  }
}

export function bindShortcuts(target: Window, actions: ShortcutActions): () => void {
  const handler = (event: KeyboardEvent) => {
    if (event.target instanceof HTMLInputElement ||
        event.target instanceof HTMLSelectElement ||
        event.target instanceof HTMLTextAreaElement) {
      return;
    }
    if (dispatchKey(event.key, actions)) {
      event.preventDefault();
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
